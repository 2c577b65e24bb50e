#pragma once

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "bab/action.hpp"
#include "bab/engine.hpp"
#include "bab/protocol.hpp"
#include "bab/world.hpp"

namespace bab {

class AgentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace agents {

enum class Role : std::uint8_t { Primary, Secondary };

inline std::string_view role_name(Role r) { return r == Role::Primary ? "primary" : "secondary"; }

inline Role role_from_name(std::string_view s) {
  if (s == "primary") return Role::Primary;
  if (s == "secondary") return Role::Secondary;
  throw std::invalid_argument("unknown role '" + std::string(s) + "'");
}

// OpenAI-compatible chat-completions endpoint.
struct RemoteSpec {
  std::string model;
  std::string base_url;  // e.g. https://api.example.com/v1
  std::string api_key;
  double temperature = 0.2;
  int max_tokens = 512;
  int timeout_seconds = 60;
  int max_retries = 3;
  int backoff_initial_ms = 1000;
};

struct RandomSpec {};
struct GreedySpec {};
struct CannedSpec {
  std::string path;  // "{id}" is replaced by the agent id
};

using BackendSpec = std::variant<RemoteSpec, RandomSpec, GreedySpec, CannedSpec>;

inline constexpr std::string_view kApiKeyEnv = "BAB_API_KEY";
inline constexpr std::string_view kBaseUrlEnv = "BAB_BASE_URL";

inline std::string env_or(std::string_view name, const std::string& fallback) {
  const char* v = std::getenv(std::string(name).c_str());
  return v && *v ? std::string(v) : fallback;
}

// "random", "greedy" and "canned:<path>" select local backends; anything else
// is a remote model name.
inline BackendSpec backend_from_model(const std::string& model, const std::string& base_url = {}) {
  if (model == "random") return RandomSpec{};
  if (model == "greedy") return GreedySpec{};
  if (model.rfind("canned:", 0) == 0) {
    if (model.size() == 7) throw std::invalid_argument("canned backend needs a transcript path");
    return CannedSpec{model.substr(7)};
  }
  if (model.empty()) throw std::invalid_argument("empty model name");
  RemoteSpec r;
  r.model = model;
  r.base_url = base_url.empty() ? env_or(kBaseUrlEnv, "") : base_url;
  r.api_key = env_or(kApiKeyEnv, "");
  return r;
}

inline std::string backend_label(const BackendSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, RemoteSpec>) return s.model;
        if constexpr (std::is_same_v<T, RandomSpec>) return "random";
        if constexpr (std::is_same_v<T, GreedySpec>) return "greedy";
        if constexpr (std::is_same_v<T, CannedSpec>) return "canned:" + s.path;
      },
      spec);
}

inline bool is_local(const BackendSpec& spec) { return !std::holds_alternative<RemoteSpec>(spec); }

struct AgentSpec {
  int id = 0;
  Role role = Role::Secondary;
  BackendSpec backend = RandomSpec{};
};

// Prompt split into chat messages: instructions go in the system message,
// the <game> state block in the user message.
struct ChatExchange {
  std::string system;
  std::string user;
};

inline ChatExchange split_prompt(const std::string& prompt) {
  static constexpr std::string_view kClose = "</game>";
  const auto pos = prompt.find(kClose);
  if (pos == std::string::npos) return {"", prompt};
  ChatExchange ex;
  ex.user = prompt.substr(0, pos + kClose.size());
  std::size_t rest = pos + kClose.size();
  while (rest < prompt.size() && prompt[rest] == '\n') ++rest;
  ex.system = prompt.substr(rest);
  return ex;
}

struct Query {
  const WorldState& world;
  int agent_id;
  std::string prompt;
  Locale locale = Locale::En;
};

struct Reply {
  std::string text;
  std::string error;  // non-empty when the backend failed; the turn is a no-op
  int attempts = 1;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual Reply decide(const Query& q) = 0;
};

// ---------------------------------------------------------------------------
// Random baseline

namespace detail {

inline std::vector<int> enemy_tank_ids(const WorldState& w, const Tank& self) {
  std::vector<int> ids;
  for (const auto& t : w.tanks) {
    if (t.id == self.id || !t.alive()) continue;
    if (t.kind == TankKind::Npc || t.team != self.team) ids.push_back(t.id);
  }
  return ids;
}

inline std::optional<int> nearest_enemy_base_id(const WorldState& w, const Tank& self) {
  if (const Base* b = engine::nearest_enemy_base(w, self)) return b->id;
  return std::nullopt;
}

}  // namespace detail

class RandomAgent : public Agent {
 public:
  explicit RandomAgent(std::uint64_t seed) : rng_(seed) {}

  Reply decide(const Query& q) override {
    const WorldState& w = q.world;
    const Tank& self = *w.find_tank(q.agent_id);
    const int stage = w.config.stage_id;
    const Action a = kAllActions[rng_.below(5)];
    std::optional<int> target;
    if (protocol::requires_target(stage)) {
      const auto enemies = detail::enemy_tank_ids(w, self);
      if (!enemies.empty()) {
        target = enemies[static_cast<std::size_t>(rng_.below(static_cast<int>(enemies.size())))];
      } else {
        target = detail::nearest_enemy_base_id(w, self).value_or(0);
      }
    }
    std::optional<CoopCommand> coop;
    if (protocol::reply_format(stage) == protocol::ReplyFormat::AttackCooperation) {
      CoopCommand c;
      c.kind = protocol::kCoopKinds[rng_.below(4)];
      if (c.kind == CoopKind::Request) {
        std::vector<int> others;
        for (int id : w.live_agent_ids())
          if (id != self.id) others.push_back(id);
        if (others.empty()) {
          c.kind = CoopKind::None;
        } else {
          c.to_id = others[static_cast<std::size_t>(rng_.below(static_cast<int>(others.size())))];
          c.message = "attack together";
        }
      }
      coop = c;
    }
    return {protocol::format_reply(stage, a, target, coop, q.locale), {}, 1};
  }

 private:
  RandomStream rng_;
};

// ---------------------------------------------------------------------------
// Greedy oracle: reads the world directly. Heads for the goal (or nearest
// enemy base) along the axis with the larger gap, shooting whatever blocks
// the way.

namespace detail {

inline std::optional<Orientation> axis_direction(int delta, bool horizontal) {
  if (delta == 0) return std::nullopt;
  if (horizontal) return delta > 0 ? Orientation::Right : Orientation::Left;
  return delta > 0 ? Orientation::Down : Orientation::Up;
}

// What a shot fired now would hit, without touching the world.
inline ShootOutcome probe_shot(const WorldState& w, int id) {
  WorldState copy = w;
  return engine::apply_shoot(copy, id);
}

inline bool blocked_ahead(const WorldState& w, const Tank& t, Orientation dir) {
  WorldState copy = w;
  return !engine::apply_move(copy, t.id, dir).moved;
}

}  // namespace detail

inline ParsedAction greedy_decide(const WorldState& w, int agent_id) {
  const Tank& self = *w.find_tank(agent_id);
  ParsedAction pa;
  pa.format_ok = true;

  std::optional<Position> goal;
  std::optional<int> target_id;
  if (w.config.is_navigation()) {
    goal = w.bases.front().pos;
  } else if (const Base* b = engine::nearest_enemy_base(w, self)) {
    goal = b->pos;
    target_id = b->id;
  }
  if (protocol::requires_target(w.config.stage_id)) pa.target_id = target_id.value_or(0);
  if (protocol::reply_format(w.config.stage_id) == protocol::ReplyFormat::AttackCooperation) {
    pa.coop = CoopCommand{CoopKind::None, 0, {}};
  }

  auto hostile_hit = [&](const ShootOutcome& s) {
    if (s.kind == ShotKind::HitWall) return true;
    if (s.kind == ShotKind::HitTank || s.kind == ShotKind::HitBase) return s.enemy;
    return false;
  };

  // An enemy base already in the line of fire is always worth a shot.
  if (!w.config.is_navigation()) {
    const auto s = detail::probe_shot(w, agent_id);
    if (s.kind == ShotKind::HitBase && s.enemy) {
      pa.action = Action::Shoot;
      return pa;
    }
  }
  if (!goal) {
    pa.action = Action::Shoot;
    return pa;
  }

  const int dx = goal->x - self.pos.x;
  const int dy = goal->y - self.pos.y;
  const bool horizontal_first = std::abs(dx) >= std::abs(dy);
  std::vector<Orientation> options;
  for (bool h : {horizontal_first, !horizontal_first}) {
    if (auto d = detail::axis_direction(h ? dx : dy, h)) options.push_back(*d);
  }
  if (options.empty()) {
    pa.action = Action::Shoot;
    return pa;
  }

  for (Orientation dir : options) {
    if (!detail::blocked_ahead(w, self, dir)) {
      pa.action = move_action(dir);
      return pa;
    }
    if (self.facing == dir) {
      if (hostile_hit(detail::probe_shot(w, agent_id))) {
        pa.action = Action::Shoot;
        return pa;
      }
      continue;  // the shot would not clear the way; try the other axis
    }
    pa.action = move_action(dir);  // turn to face the obstacle
    return pa;
  }
  // Both axes blocked and unshootable: sidestep perpendicular to the first option.
  const Orientation first = options.front();
  const bool vertical = first == Orientation::Up || first == Orientation::Down;
  for (Orientation side : vertical ? std::vector{Orientation::Left, Orientation::Right}
                                   : std::vector{Orientation::Up, Orientation::Down}) {
    if (!detail::blocked_ahead(w, self, side)) {
      pa.action = move_action(side);
      return pa;
    }
  }
  pa.action = Action::Shoot;
  return pa;
}

class GreedyAgent : public Agent {
 public:
  Reply decide(const Query& q) override {
    const ParsedAction pa = greedy_decide(q.world, q.agent_id);
    return {protocol::format_reply(q.world.config.stage_id, *pa.action, pa.target_id, pa.coop, q.locale), {}, 1};
  }
};

// ---------------------------------------------------------------------------
// Canned transcript: one reply per line, "\n" escapes a newline.

inline std::string unescape_line(const std::string& line) {
  std::string out;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && i + 1 < line.size()) {
      const char c = line[i + 1];
      if (c == 'n') {
        out += '\n';
        ++i;
        continue;
      }
      if (c == '\\') {
        out += '\\';
        ++i;
        continue;
      }
    }
    out += line[i];
  }
  return out;
}

inline std::string canned_path(const std::string& pattern, int agent_id) {
  std::string p = pattern;
  const std::string key = "{id}";
  for (auto pos = p.find(key); pos != std::string::npos; pos = p.find(key)) p.replace(pos, key.size(), std::to_string(agent_id));
  return p;
}

class CannedAgent : public Agent {
 public:
  CannedAgent(const std::string& pattern, int agent_id) : path_(canned_path(pattern, agent_id)) {
    std::ifstream in(path_);
    if (!in) throw AgentError("cannot open transcript " + path_);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines_.push_back(unescape_line(line));
    }
  }

  Reply decide(const Query&) override {
    if (next_ >= lines_.size()) throw AgentError("transcript " + path_ + " exhausted after " + std::to_string(next_) + " replies");
    return {lines_[next_++], {}, 1};
  }

 private:
  std::string path_;
  std::vector<std::string> lines_;
  std::size_t next_ = 0;
};

// ---------------------------------------------------------------------------
// Remote chat-completions client

struct Endpoint {
  std::string scheme_host_port;  // http://host:port
  std::string path_prefix;       // /v1
};

inline Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("base url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.scheme_host_port = url.substr(0, path_start);
  e.path_prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!e.path_prefix.empty() && e.path_prefix.back() == '/') e.path_prefix.pop_back();
  return e;
}

inline nlohmann::json chat_request_body(const RemoteSpec& spec, const ChatExchange& ex) {
  return {{"model", spec.model},
          {"messages",
           nlohmann::json::array({{{"role", "system"}, {"content", ex.system}}, {{"role", "user"}, {"content", ex.user}}})},
          {"temperature", spec.temperature},
          {"max_tokens", spec.max_tokens}};
}

class RemoteAgent : public Agent {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit RemoteAgent(RemoteSpec spec, Sleeper sleeper = default_sleep) : spec_(std::move(spec)), sleep_(std::move(sleeper)) {
    if (spec_.base_url.empty()) {
      throw AgentError("no base url for model '" + spec_.model + "' (set --primary-url/--ref-url or " +
                       std::string(kBaseUrlEnv) + ")");
    }
    endpoint_ = split_url(spec_.base_url);
  }

  Reply decide(const Query& q) override {
    const std::string body = chat_request_body(spec_, split_prompt(q.prompt)).dump();
    Reply reply;
    std::string last_error;
    const int attempts = 1 + std::max(0, spec_.max_retries);
    for (int attempt = 0; attempt < attempts; ++attempt) {
      reply.attempts = attempt + 1;
      if (attempt > 0) sleep_(std::chrono::milliseconds(static_cast<long long>(spec_.backoff_initial_ms) << (attempt - 1)));
      httplib::Client client(endpoint_.scheme_host_port);
      client.set_connection_timeout(spec_.timeout_seconds, 0);
      client.set_read_timeout(spec_.timeout_seconds, 0);
      client.set_write_timeout(spec_.timeout_seconds, 0);
      httplib::Headers headers;
      if (!spec_.api_key.empty()) headers.emplace("Authorization", "Bearer " + spec_.api_key);
      auto res = client.Post(endpoint_.path_prefix + "/chat/completions", headers, body, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "http status " + std::to_string(res->status);
        continue;
      }
      try {
        const auto j = nlohmann::json::parse(res->body);
        reply.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        reply.error.clear();
        return reply;
      } catch (const std::exception& e) {
        last_error = std::string("malformed response: ") + e.what();
      }
    }
    reply.text.clear();
    reply.error = last_error;
    return reply;
  }

  static void default_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

 private:
  RemoteSpec spec_;
  Sleeper sleep_;
  Endpoint endpoint_;
};

// Backend instance for one agent of one episode. Local backends derive their
// stream from the run seed and agent id so every slot is reproducible.
inline std::unique_ptr<Agent> make_agent(const AgentSpec& spec, std::uint64_t run_seed) {
  return std::visit(
      [&](const auto& s) -> std::unique_ptr<Agent> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, RemoteSpec>) return std::make_unique<RemoteAgent>(s);
        if constexpr (std::is_same_v<T, RandomSpec>)
          return std::make_unique<RandomAgent>(mix_seed(run_seed, 100 + static_cast<std::uint64_t>(spec.id)));
        if constexpr (std::is_same_v<T, GreedySpec>) return std::make_unique<GreedyAgent>();
        if constexpr (std::is_same_v<T, CannedSpec>) return std::make_unique<CannedAgent>(s.path, spec.id);
      },
      spec.backend);
}

}  // namespace agents
}  // namespace bab
