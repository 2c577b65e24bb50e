#pragma once

#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bab/engine.hpp"
#include "bab/protocol.hpp"
#include "bab/stage.hpp"

namespace bab {

inline constexpr std::string_view kToolVersion = "bab 1.0.0";

class LogFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MaccDenominator : std::uint8_t { Moves, Formatted };

inline std::string_view macc_denominator_name(MaccDenominator m) {
  return m == MaccDenominator::Moves ? "moves" : "formatted";
}

inline MaccDenominator macc_denominator_from_name(std::string_view s) {
  if (s == "moves") return MaccDenominator::Moves;
  if (s == "formatted") return MaccDenominator::Formatted;
  throw std::invalid_argument("unknown move-accuracy denominator '" + std::string(s) + "' (moves|formatted)");
}

// ---------------------------------------------------------------------------
// Log contents, independent of the on-disk form.

struct AgentEntry {
  int id = 0;
  std::string role;     // "primary" | "secondary"
  std::string backend;  // backend label
  Position start;
  std::optional<Position> distance_target;

  friend bool operator==(const AgentEntry&, const AgentEntry&) = default;
};

struct LogHeader {
  std::string version{kToolVersion};
  StageConfig config;
  std::uint64_t seed = 0;
  int run = 0;
  std::string model;  // primary backend label
  bool coop_enabled = true;
  Locale locale = Locale::En;
  MaccDenominator macc = MaccDenominator::Moves;
  std::vector<AgentEntry> agents;
  std::string initial_hash;

  std::vector<int> primary_ids() const {
    std::vector<int> ids;
    for (const auto& a : agents)
      if (a.role == "primary") ids.push_back(a.id);
    return ids;
  }
};

// Turn record plus backend bookkeeping that does not affect the simulation.
struct LoggedTurn {
  TurnRecord record;
  int attempts = 1;
  long long latency_ms = 0;
};

struct EpisodeMetrics {
  double f_dis = 0.0;
  double f_acc = 0.0;
  std::optional<double> m_acc;
  int score = 0;
  std::optional<double> goal_completion;

  friend bool operator==(const EpisodeMetrics&, const EpisodeMetrics&) = default;
};

struct LogFooter {
  EndReason reason = EndReason::None;
  int winner_team = kNoTeam;
  int turns = 0;
  std::string world_hash;
  EpisodeMetrics metrics;
  std::string error;  // set when the episode was aborted
};

struct EpisodeLog {
  LogHeader header;
  std::vector<LoggedTurn> turns;
  std::vector<protocol::CoopEvent> coop;
  std::optional<LogFooter> footer;
};

// ---------------------------------------------------------------------------
// JSON Lines encoding. One object per line, keys sorted, compact.

namespace replay {

using nlohmann::json;

inline json pos_json(Position p) { return json::array({p.x, p.y}); }

inline json opt_pos_json(const std::optional<Position>& p) { return p ? pos_json(*p) : json(nullptr); }

inline Position pos_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw LogFormatError("position must be [x, y]");
  return {j.at(0).get<int>(), j.at(1).get<int>()};
}

inline std::optional<Position> opt_pos_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return pos_from(j);
}

inline std::string dump_line(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
}

inline json positions_json(const std::vector<Position>& ps) {
  json a = json::array();
  for (Position p : ps) a.push_back(pos_json(p));
  return a;
}

inline std::vector<Position> positions_from(const json& j) {
  std::vector<Position> out;
  for (const auto& e : j) out.push_back(pos_from(e));
  return out;
}

inline json config_json(const StageConfig& c) {
  return {{"stage", c.stage_id},
          {"turns", c.turn_cap},
          {"agents", c.n_agents},
          {"teams", c.n_teams},
          {"bases", c.n_bases},
          {"npcs", c.n_npcs},
          {"goal", goal_name(c.goal)},
          {"coop_topology", topology_name(c.coop_topology)},
          {"spawn_jitter_cells", c.spawn_jitter_cells},
          {"wall_permille", c.wall_permille},
          {"base_walls", c.base_walls},
          {"agent_positions", positions_json(c.agent_positions)},
          {"base_positions", positions_json(c.base_positions)},
          {"npc_positions", positions_json(c.npc_positions)}};
}

inline StageConfig config_from(const json& j) {
  StageConfig c;
  c.stage_id = j.at("stage").get<int>();
  c.turn_cap = j.at("turns").get<int>();
  c.n_agents = j.at("agents").get<int>();
  c.n_teams = j.at("teams").get<int>();
  c.n_bases = j.at("bases").get<int>();
  c.n_npcs = j.at("npcs").get<int>();
  c.goal = goal_from_name(j.at("goal").get<std::string>());
  c.coop_topology = topology_from_name(j.at("coop_topology").get<std::string>());
  c.spawn_jitter_cells = j.at("spawn_jitter_cells").get<int>();
  c.wall_permille = j.at("wall_permille").get<int>();
  c.base_walls = j.at("base_walls").get<bool>();
  c.agent_positions = positions_from(j.at("agent_positions"));
  c.base_positions = positions_from(j.at("base_positions"));
  c.npc_positions = positions_from(j.at("npc_positions"));
  return c;
}

inline json header_json(const LogHeader& h) {
  json agents = json::array();
  for (const auto& a : h.agents) {
    agents.push_back({{"id", a.id},
                      {"role", a.role},
                      {"backend", a.backend},
                      {"start", pos_json(a.start)},
                      {"distance_target", opt_pos_json(a.distance_target)}});
  }
  return {{"kind", "header"},
          {"version", h.version},
          {"config", config_json(h.config)},
          {"seed", h.seed},
          {"run", h.run},
          {"model", h.model},
          {"coop_enabled", h.coop_enabled},
          {"locale", locale_name(h.locale)},
          {"macc_denominator", macc_denominator_name(h.macc)},
          {"agents", agents},
          {"initial_hash", h.initial_hash}};
}

inline LogHeader header_from(const json& j) {
  LogHeader h;
  h.version = j.at("version").get<std::string>();
  h.config = config_from(j.at("config"));
  h.seed = j.at("seed").get<std::uint64_t>();
  h.run = j.at("run").get<int>();
  h.model = j.at("model").get<std::string>();
  h.coop_enabled = j.at("coop_enabled").get<bool>();
  h.locale = locale_from_name(j.at("locale").get<std::string>());
  h.macc = macc_denominator_from_name(j.at("macc_denominator").get<std::string>());
  for (const auto& a : j.at("agents")) {
    AgentEntry e;
    e.id = a.at("id").get<int>();
    e.role = a.at("role").get<std::string>();
    e.backend = a.at("backend").get<std::string>();
    e.start = pos_from(a.at("start"));
    e.distance_target = opt_pos_from(a.at("distance_target"));
    h.agents.push_back(std::move(e));
  }
  h.initial_hash = j.at("initial_hash").get<std::string>();
  return h;
}

inline json coop_command_json(const std::optional<CoopCommand>& c) {
  if (!c) return nullptr;
  return {{"kind", coop_kind_name(c->kind)}, {"to", c->to_id}, {"message", c->message}};
}

inline std::optional<CoopCommand> coop_command_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  CoopCommand c;
  const auto kind = coop_kind_from_name(j.at("kind").get<std::string>());
  if (!kind) throw LogFormatError("unknown coop kind");
  c.kind = *kind;
  c.to_id = j.at("to").get<int>();
  c.message = j.at("message").get<std::string>();
  return c;
}

inline json resolution_json(const Resolution& r) {
  return {{"kind", resolution_name(r.kind)}, {"blocker", blocker_name(r.blocker)}, {"cells", r.cells},
          {"target", r.target_id},           {"destroyed", r.destroyed},           {"enemy", r.enemy}};
}

inline Resolution resolution_from(const json& j) {
  Resolution r;
  const auto kind = resolution_from_name(j.at("kind").get<std::string>());
  if (!kind) throw LogFormatError("unknown outcome kind");
  r.kind = *kind;
  const std::string blocker = j.at("blocker").get<std::string>();
  bool found = false;
  for (Blocker b : {Blocker::None, Blocker::Wall, Blocker::Tank, Blocker::Base, Blocker::Boundary}) {
    if (blocker_name(b) == blocker) {
      r.blocker = b;
      found = true;
    }
  }
  if (!found) throw LogFormatError("unknown blocker");
  r.cells = j.at("cells").get<std::vector<int>>();
  r.target_id = j.at("target").get<int>();
  r.destroyed = j.at("destroyed").get<bool>();
  r.enemy = j.at("enemy").get<bool>();
  return r;
}

inline json turn_json(const LoggedTurn& t) {
  const TurnRecord& r = t.record;
  const ParsedAction& p = r.parsed;
  return {{"kind", "turn"},
          {"turn", r.turn},
          {"agent", r.agent_id},
          {"prompt_digest", r.prompt_digest},
          {"raw", p.raw},
          {"format_ok", p.format_ok},
          {"action", p.action ? json(action_name(*p.action)) : json(nullptr)},
          {"target", p.target_id ? json(*p.target_id) : json(nullptr)},
          {"coop", coop_command_json(p.coop)},
          {"outcome", resolution_json(r.resolution)},
          {"pos_before", pos_json(r.pos_before)},
          {"pos_after", pos_json(r.pos_after)},
          {"score_delta", r.score_delta},
          {"objective", opt_pos_json(r.objective)},
          {"error", r.error},
          {"attempts", t.attempts},
          {"latency_ms", t.latency_ms},
          {"world_hash", r.world_hash}};
}

inline LoggedTurn turn_from(const json& j) {
  LoggedTurn t;
  TurnRecord& r = t.record;
  r.turn = j.at("turn").get<int>();
  r.agent_id = j.at("agent").get<int>();
  r.prompt_digest = j.at("prompt_digest").get<std::string>();
  r.parsed.raw = j.at("raw").get<std::string>();
  r.parsed.format_ok = j.at("format_ok").get<bool>();
  if (const auto& a = j.at("action"); !a.is_null()) {
    const auto action = action_from_name(a.get<std::string>());
    if (!action) throw LogFormatError("unknown action '" + a.get<std::string>() + "'");
    r.parsed.action = action;
  }
  if (const auto& tg = j.at("target"); !tg.is_null()) r.parsed.target_id = tg.get<int>();
  r.parsed.coop = coop_command_from(j.at("coop"));
  r.resolution = resolution_from(j.at("outcome"));
  r.pos_before = pos_from(j.at("pos_before"));
  r.pos_after = pos_from(j.at("pos_after"));
  r.score_delta = j.at("score_delta").get<int>();
  r.objective = opt_pos_from(j.at("objective"));
  r.error = j.at("error").get<std::string>();
  t.attempts = j.at("attempts").get<int>();
  t.latency_ms = j.at("latency_ms").get<long long>();
  r.world_hash = j.at("world_hash").get<std::string>();
  return t;
}

inline json coop_json(const protocol::CoopEvent& e) {
  return {{"kind", "coop"},          {"turn", e.turn}, {"event", protocol::coop_event_name(e.kind)},
          {"from", e.from_id},       {"to", e.to_id},  {"body", e.body},
          {"note", e.note}};
}

inline protocol::CoopEvent coop_from(const json& j) {
  protocol::CoopEvent e;
  e.turn = j.at("turn").get<int>();
  const auto kind = protocol::coop_event_from_name(j.at("event").get<std::string>());
  if (!kind) throw LogFormatError("unknown coop event");
  e.kind = *kind;
  e.from_id = j.at("from").get<int>();
  e.to_id = j.at("to").get<int>();
  e.body = j.at("body").get<std::string>();
  e.note = j.at("note").get<std::string>();
  return e;
}

inline json opt_double(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json metrics_json(const EpisodeMetrics& m) {
  return {{"f_dis", m.f_dis},
          {"f_acc", m.f_acc},
          {"m_acc", opt_double(m.m_acc)},
          {"score", m.score},
          {"goal_completion", opt_double(m.goal_completion)}};
}

inline std::optional<double> opt_double_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

inline EpisodeMetrics metrics_from(const json& j) {
  EpisodeMetrics m;
  m.f_dis = j.at("f_dis").get<double>();
  m.f_acc = j.at("f_acc").get<double>();
  m.m_acc = opt_double_from(j.at("m_acc"));
  m.score = j.at("score").get<int>();
  m.goal_completion = opt_double_from(j.at("goal_completion"));
  return m;
}

inline json footer_json(const LogFooter& f) {
  return {{"kind", "end"},
          {"reason", end_reason_name(f.reason)},
          {"winner_team", f.winner_team},
          {"turns", f.turns},
          {"world_hash", f.world_hash},
          {"metrics", metrics_json(f.metrics)},
          {"error", f.error}};
}

inline LogFooter footer_from(const json& j) {
  LogFooter f;
  const auto reason = end_reason_from_name(j.at("reason").get<std::string>());
  if (!reason) throw LogFormatError("unknown end reason");
  f.reason = *reason;
  f.winner_team = j.at("winner_team").get<int>();
  f.turns = j.at("turns").get<int>();
  f.world_hash = j.at("world_hash").get<std::string>();
  f.metrics = metrics_from(j.at("metrics"));
  f.error = j.at("error").get<std::string>();
  return f;
}

// Incremental writer; every record is flushed so a crash loses at most the
// turn in progress.
class LogWriter {
 public:
  explicit LogWriter(std::ostream& out) : out_(out) {}

  void header(const LogHeader& h) { write(header_json(h)); }
  void coop(const protocol::CoopEvent& e) { write(coop_json(e)); }
  void turn(const LoggedTurn& t) { write(turn_json(t)); }
  void footer(const LogFooter& f) { write(footer_json(f)); }
  void flush() { out_.flush(); }

 private:
  void write(const json& j) {
    out_ << dump_line(j);
    if (!out_) throw std::ios_base::failure("replay log write failed");
  }

  std::ostream& out_;
};

// Parses a log. A log cut off at a record boundary (no footer) is accepted.
inline EpisodeLog read_log(std::istream& in) {
  EpisodeLog log;
  std::string line;
  int n = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string kind = j.at("kind").get<std::string>();
      if (!have_header) {
        if (kind != "header") throw LogFormatError("first record must be the header");
        log.header = header_from(j);
        have_header = true;
        continue;
      }
      if (log.footer) throw LogFormatError("record after the end record");
      if (kind == "turn") log.turns.push_back(turn_from(j));
      else if (kind == "coop") log.coop.push_back(coop_from(j));
      else if (kind == "end") log.footer = footer_from(j);
      else throw LogFormatError("unknown record kind '" + kind + "'");
    } catch (const LogFormatError& e) {
      throw LogFormatError("line " + std::to_string(n) + ": " + e.what());
    } catch (const std::exception& e) {
      throw LogFormatError("line " + std::to_string(n) + ": " + e.what());
    }
  }
  if (!have_header) throw LogFormatError("empty log");
  return log;
}

inline EpisodeLog read_log_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  return read_log(in);
}

}  // namespace replay
}  // namespace bab
