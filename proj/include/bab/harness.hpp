#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bab/agents.hpp"
#include "bab/engine.hpp"
#include "bab/metrics.hpp"
#include "bab/protocol.hpp"
#include "bab/replay.hpp"

namespace bab::harness {

namespace fs = std::filesystem;

inline constexpr int kDefaultRemoteRuns = 3;
inline constexpr int kDefaultLocalRuns = 5;

struct RunConfig {
  int stage_id = 1;
  std::vector<std::uint64_t> seeds;
  agents::BackendSpec primary = agents::RandomSpec{};
  agents::BackendSpec reference = agents::RandomSpec{};
  bool coop_enabled = true;
  Locale locale = Locale::En;
  MaccDenominator macc = MaccDenominator::Moves;
  StageOverrides overrides;
  std::string out_dir = "results";

  StageConfig stage() const { return apply_overrides(default_stage(stage_id), overrides); }
};

struct EpisodeResult {
  EpisodeLog log;
  std::string error;  // non-empty when the episode aborted
};

// ---------------------------------------------------------------------------
// Episode loop

// Plays one episode and streams its replay log to `out` (if given).
// Sees every prompt as it is sent: (turn, agent id, text).
using PromptObserver = std::function<void(int, int, const std::string&)>;

inline EpisodeResult run_episode(const RunConfig& cfg, std::uint64_t seed, int run_index = 0,
                                 std::ostream* out = nullptr, const PromptObserver& observe = {}) {
  EpisodeResult result;
  EpisodeLog& log = result.log;
  WorldState world = engine::load_stage(cfg.stage(), seed);
  world.coop_enabled = cfg.coop_enabled;
  const int stage = world.config.stage_id;

  const std::vector<int> primary = metrics::primary_agent_ids(world.config);
  std::map<int, std::unique_ptr<agents::Agent>> agents_by_id;
  std::set<int> remote;

  LogHeader& h = log.header;
  h.config = world.config;
  h.seed = seed;
  h.run = run_index;
  h.model = agents::backend_label(cfg.primary);
  h.coop_enabled = cfg.coop_enabled;
  h.locale = cfg.locale;
  h.macc = cfg.macc;
  for (int id : world.agent_ids()) {
    const bool is_primary = std::find(primary.begin(), primary.end(), id) != primary.end();
    agents::AgentSpec spec{id, is_primary ? agents::Role::Primary : agents::Role::Secondary,
                           is_primary ? cfg.primary : cfg.reference};
    h.agents.push_back({id, std::string(agents::role_name(spec.role)), agents::backend_label(spec.backend),
                        world.find_tank(id)->pos, engine::distance_target(world, id)});
    if (!agents::is_local(spec.backend)) remote.insert(id);
    agents_by_id[id] = agents::make_agent(spec, seed);
  }
  h.initial_hash = world_hash(world);

  std::optional<replay::LogWriter> writer;
  if (out) {
    writer.emplace(*out);
    writer->header(h);
    writer->flush();
  }

  std::map<int, protocol::LastRound> last;
  try {
    while (world.status.running()) {
      std::map<int, ParsedAction> actions;
      std::map<int, std::string> digests, errors;
      std::map<int, std::pair<int, long long>> calls;
      for (int id : world.live_agent_ids()) {
        std::optional<protocol::LastRound> prev;
        if (auto it = last.find(id); it != last.end()) prev = it->second;
        const std::string prompt = protocol::render_observation(world, id, cfg.locale, prev);
        digests[id] = digest(prompt);
        if (observe) observe(world.turn, id, prompt);
        const auto t0 = std::chrono::steady_clock::now();
        agents::Reply reply = agents_by_id.at(id)->decide({world, id, prompt, cfg.locale});
        long long latency = 0;  // local backends log 0 to keep logs byte-stable
        if (remote.count(id)) {
          latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
        }
        calls[id] = {reply.attempts, latency};
        if (reply.error.empty()) {
          actions[id] = protocol::parse_response(stage, reply.text);
        } else {
          ParsedAction failed;
          failed.raw = reply.text;
          actions[id] = failed;
          errors[id] = reply.error;
        }
      }

      for (const auto& e : protocol::route_coop(world, actions, cfg.coop_enabled)) {
        log.coop.push_back(e);
        if (writer) writer->coop(e);
      }
      for (auto& r : engine::step_turn(world, actions)) {
        r.prompt_digest = digests[r.agent_id];
        if (auto it = errors.find(r.agent_id); it != errors.end()) r.error = it->second;
        last[r.agent_id] = protocol::last_round_from(r, stage, cfg.locale);
        const auto [attempts, latency] = calls[r.agent_id];
        LoggedTurn lt{std::move(r), attempts, latency};
        if (writer) writer->turn(lt);
        log.turns.push_back(std::move(lt));
      }
      if (writer) writer->flush();
    }
  } catch (const AgentError& e) {
    result.error = e.what();
  }

  LogFooter f;
  f.reason = world.status.reason;
  f.winner_team = world.status.winner_team;
  f.turns = world.turn;
  f.world_hash = world_hash(world);
  f.error = result.error;
  log.footer = f;
  log.footer->metrics = metrics::episode_metrics(log);
  if (writer) {
    writer->footer(*log.footer);
    writer->flush();
  }
  return result;
}

// ---------------------------------------------------------------------------
// Replay verification

struct VerifyResult {
  bool ok = true;
  bool partial = false;  // log had no end record
  int turn = -1;         // divergence turn; -1 for header/footer problems
  std::string reason;
};

inline VerifyResult fail_at(int turn, std::string why) { return {false, false, turn, std::move(why)}; }

// Re-simulates a log from its header and checks every logged outcome.
inline VerifyResult replay_verify(const EpisodeLog& log) {
  const LogHeader& h = log.header;
  WorldState world;
  try {
    world = engine::load_stage(h.config, h.seed);
  } catch (const std::exception& e) {
    return fail_at(-1, std::string("header does not load: ") + e.what());
  }
  world.coop_enabled = h.coop_enabled;
  if (world_hash(world) != h.initial_hash) return fail_at(-1, "initial world hash mismatch");
  for (const auto& a : h.agents) {
    const Tank* t = world.find_tank(a.id);
    if (!t || !t->is_agent() || t->pos != a.start) return fail_at(-1, "agent table does not match the stage");
    if (engine::distance_target(world, a.id) != a.distance_target) return fail_at(-1, "distance target mismatch");
  }
  const int stage = h.config.stage_id;

  std::size_t ti = 0;
  std::size_t ci = 0;
  std::map<int, protocol::LastRound> last;
  while (ti < log.turns.size()) {
    const int turn = world.turn;
    if (!world.status.running()) return fail_at(turn, "turn records after the episode ended");
    const auto live = world.live_agent_ids();
    std::map<int, ParsedAction> actions;
    std::vector<const LoggedTurn*> logged;
    for (int id : live) {
      if (ti >= log.turns.size()) {
        if (actions.empty()) break;
        // A log cut inside a turn: the records present were checked above.
        if (!log.footer) return {true, true, -1, {}};
        return fail_at(turn, "log truncated inside a turn");
      }
      const LoggedTurn& lt = log.turns[ti];
      const TurnRecord& r = lt.record;
      if (r.turn != turn || r.agent_id != id) {
        return fail_at(turn, "expected record for agent " + std::to_string(id) + " at turn " + std::to_string(turn));
      }
      std::optional<protocol::LastRound> prev;
      if (auto it = last.find(id); it != last.end()) prev = it->second;
      if (digest(protocol::render_observation(world, id, h.locale, prev)) != r.prompt_digest) {
        return fail_at(turn, "prompt digest mismatch for agent " + std::to_string(id));
      }
      if (r.error.empty()) {
        if (!protocol::parse_response(stage, r.parsed.raw).same_decision(r.parsed)) {
          return fail_at(turn, "logged action of agent " + std::to_string(id) + " does not match its reply");
        }
      } else if (r.parsed.format_ok || r.parsed.action) {
        return fail_at(turn, "failed call logged with an action");
      }
      actions[id] = r.parsed;
      logged.push_back(&lt);
      ++ti;
    }
    if (actions.empty()) break;

    for (const auto& e : protocol::route_coop(world, actions, h.coop_enabled)) {
      if (ci >= log.coop.size() || !(log.coop[ci] == e)) return fail_at(turn, "cooperation event mismatch");
      ++ci;
    }
    const auto records = engine::step_turn(world, actions);
    for (std::size_t k = 0; k < records.size(); ++k) {
      const TurnRecord& want = logged[k]->record;
      const TurnRecord& got = records[k];
      const std::string who = " for agent " + std::to_string(got.agent_id);
      if (!(got.resolution == want.resolution)) return fail_at(turn, "outcome mismatch" + who);
      if (got.pos_before != want.pos_before || got.pos_after != want.pos_after)
        return fail_at(turn, "position mismatch" + who);
      if (got.score_delta != want.score_delta) return fail_at(turn, "score mismatch" + who);
      if (got.objective != want.objective) return fail_at(turn, "objective mismatch" + who);
      if (got.world_hash != want.world_hash) return fail_at(turn, "world hash mismatch" + who);
      last[got.agent_id] = protocol::last_round_from(want, stage, h.locale);
    }
  }
  // Trailing cooperation records of a cut log belong to a turn whose actions
  // were never written; they cannot be checked.
  if (ci != log.coop.size() && log.footer) return fail_at(world.turn, "unexpected cooperation records");

  if (!log.footer) {
    VerifyResult r;
    r.partial = true;
    return r;
  }
  const LogFooter& f = *log.footer;
  if (f.error.empty() && world.status.running()) return fail_at(-1, "end record before the episode ended");
  if (f.reason != world.status.reason || f.winner_team != world.status.winner_team)
    return fail_at(-1, "end reason mismatch");
  if (f.turns != world.turn) return fail_at(-1, "turn count mismatch");
  if (f.world_hash != world_hash(world)) return fail_at(-1, "final world hash mismatch");
  EpisodeLog body = log;
  body.footer.reset();
  try {
    if (!(metrics::episode_metrics(body) == f.metrics)) return fail_at(-1, "metrics do not match the turn records");
  } catch (const std::exception& e) {
    return fail_at(-1, std::string("metrics: ") + e.what());
  }
  return {};
}

inline VerifyResult replay_verify_file(const std::string& path) {
  EpisodeLog log;
  try {
    log = replay::read_log_file(path);
  } catch (const LogFormatError& e) {
    return fail_at(-1, std::string("malformed log: ") + e.what());
  }
  return replay_verify(log);
}

// ---------------------------------------------------------------------------
// Reports

inline std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  return out;
}

inline std::string log_file_name(int stage, const std::string& model, int run, std::uint64_t seed) {
  return "stage" + std::to_string(stage) + "_" + sanitize(model) + "_run" + std::to_string(run) + "_seed" +
         std::to_string(seed) + ".jsonl";
}

inline metrics::EpisodeRow row_of(const EpisodeLog& log) {
  metrics::EpisodeRow row;
  row.stage = log.header.config.stage_id;
  row.model = log.header.model;
  row.run = log.header.run;
  row.seed = log.header.seed;
  if (log.footer) {
    row.metrics = log.footer->metrics;
    row.end_reason = std::string(end_reason_name(log.footer->reason));
    if (!log.footer->error.empty()) row.end_reason = "Error";
    row.turns = log.footer->turns;
  } else {
    row.metrics = metrics::episode_metrics(log);
    row.end_reason = "Incomplete";
    row.turns = log.turns.empty() ? 0 : log.turns.back().record.turn + 1;
  }
  return row;
}

inline std::string fixed(double v, int precision = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

inline std::string fixed(const std::optional<double>& v, int precision = 4) {
  return v ? fixed(*v, precision) : std::string();
}

inline void sort_rows(std::vector<metrics::EpisodeRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.stage, a.model, a.run, a.seed) < std::tie(b.stage, b.model, b.run, b.seed);
  });
}

inline void write_csv(std::ostream& out, std::vector<metrics::EpisodeRow> rows) {
  sort_rows(rows);
  out << "stage,model,run,f_dis,f_acc,m_acc,score,goal_completion,end_reason,turns\n";
  for (const auto& r : rows) {
    std::string model = r.model;
    if (model.find_first_of(",\"") != std::string::npos) {
      std::string q = "\"";
      for (char c : model) q += c == '"' ? std::string("\"\"") : std::string(1, c);
      model = q + "\"";
    }
    out << r.stage << "," << model << "," << r.run << "," << fixed(r.metrics.f_dis) << "," << fixed(r.metrics.f_acc)
        << "," << fixed(r.metrics.m_acc) << "," << r.metrics.score << "," << fixed(r.metrics.goal_completion) << ","
        << r.end_reason << "," << r.turns << "\n";
  }
}

inline std::string cell(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

// Tables laid out as in the benchmark report: navigation stages with distance
// metrics, battle stages with scores, and cross-stage averages.
inline void write_summary(std::ostream& out, const metrics::Report& rep) {
  std::vector<std::string> models;
  for (const auto& s : rep.stages)
    if (std::find(models.begin(), models.end(), s.model) == models.end()) models.push_back(s.model);
  auto find = [&](const std::string& model, int stage) -> const metrics::StageSummary* {
    for (const auto& s : rep.stages)
      if (s.model == model && s.stage == stage) return &s;
    return nullptr;
  };
  auto present = [&](int stage) {
    return std::any_of(rep.stages.begin(), rep.stages.end(), [&](const auto& s) { return s.stage == stage; });
  };

  struct Table {
    std::string title;
    std::vector<int> stages;
    bool distance;
    const std::map<std::string, double>* avg;
    std::string avg_label;
  };
  const std::vector<Table> tables = {
      {"Level 1 (navigation)", {1, 2}, true, &rep.avg_distance, "Avg. Dis"},
      {"Level 2 (paired agents)", {3, 4}, false, &rep.avg_score_level2, "Avg. Score"},
      {"Level 3 (multi-agent)", {5, 6, 7}, false, &rep.avg_score_level3, "Avg. Score"},
  };
  const std::size_t mw = std::max<std::size_t>(
      12, 2 + std::max_element(models.begin(), models.end(), [](auto& a, auto& b) { return a.size() < b.size(); })->size());
  bool first = true;
  for (const auto& t : tables) {
    std::vector<int> stages;
    for (int s : t.stages)
      if (present(s)) stages.push_back(s);
    if (stages.empty()) continue;
    if (!first) out << "\n";
    first = false;
    out << t.title << "\n";
    std::string head = cell("Model", mw);
    for (int s : stages) {
      const std::string p = "S" + std::to_string(s) + " ";
      head += cell(p + (t.distance ? "F Dis" : "Score"), 11) + cell(p + "F Acc", 11) + cell(p + "M Acc", 11);
      if (t.distance) head += cell(p + "Goal", 11);
      head += cell(p + "Runs", 8);
    }
    head += t.avg_label;
    out << head << "\n";
    for (const auto& m : models) {
      std::string line = cell(m, mw);
      bool any = false;
      for (int s : stages) {
        const auto* st = find(m, s);
        if (!st) {
          line += cell("-", 11) + cell("-", 11) + cell("-", 11) + (t.distance ? cell("-", 11) : "") + cell("-", 8);
          continue;
        }
        any = true;
        line += cell(fixed(t.distance ? st->f_dis : st->score, 2), 11) + cell(fixed(st->f_acc, 2), 11) +
                cell(st->m_acc ? fixed(*st->m_acc, 2) : "-", 11);
        if (t.distance) line += cell(st->goal_completion ? fixed(*st->goal_completion, 2) : "-", 11);
        line += cell(std::to_string(st->runs), 8);
      }
      if (!any) continue;
      const auto it = t.avg->find(m);
      line += it == t.avg->end() ? "-" : fixed(it->second, 2);
      out << line << "\n";
    }
  }
}

inline void write_reports(const fs::path& dir, const std::vector<metrics::EpisodeRow>& rows) {
  {
    std::ofstream csv(dir / "results.csv", std::ios::binary);
    if (!csv) throw std::ios_base::failure("cannot write " + (dir / "results.csv").string());
    write_csv(csv, rows);
  }
  std::ofstream sum(dir / "summary.txt", std::ios::binary);
  if (!sum) throw std::ios_base::failure("cannot write " + (dir / "summary.txt").string());
  write_summary(sum, metrics::aggregate(rows));
}

// Rebuilds results.csv and summary.txt from the logs in `dir`.
inline std::vector<metrics::EpisodeRow> report_dir(const fs::path& dir) {
  std::vector<fs::path> logs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".jsonl") logs.push_back(e.path());
  std::sort(logs.begin(), logs.end());
  if (logs.empty()) throw std::ios_base::failure("no replay logs in " + dir.string());
  std::vector<metrics::EpisodeRow> rows;
  for (const auto& p : logs) rows.push_back(row_of(replay::read_log_file(p.string())));
  write_reports(dir, rows);
  return rows;
}

// ---------------------------------------------------------------------------
// Suites

struct EpisodeFailure {
  int stage = 0;
  std::uint64_t seed = 0;
  std::string message;
};

struct SuiteResult {
  std::vector<metrics::EpisodeRow> rows;
  std::vector<std::string> log_paths;
  std::vector<EpisodeFailure> failures;
};

// Runs every (config, seed) episode, writing one log per episode plus the
// CSV and summary. Episode failures are recorded and the suite continues.
inline SuiteResult run_benchmark(const std::vector<RunConfig>& suite, const fs::path& out_dir) {
  if (suite.empty()) throw ConfigError("empty suite");
  fs::create_directories(out_dir);
  SuiteResult res;
  for (const auto& cfg : suite) {
    const std::string model = agents::backend_label(cfg.primary);
    for (std::size_t r = 0; r < cfg.seeds.size(); ++r) {
      const std::uint64_t seed = cfg.seeds[r];
      const fs::path path = out_dir / log_file_name(cfg.stage_id, model, static_cast<int>(r), seed);
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      if (!out) throw std::ios_base::failure("cannot write " + path.string());
      try {
        EpisodeResult ep = run_episode(cfg, seed, static_cast<int>(r), &out);
        if (!ep.error.empty()) res.failures.push_back({cfg.stage_id, seed, ep.error});
        res.rows.push_back(row_of(ep.log));
        res.log_paths.push_back(path.string());
      } catch (const std::ios_base::failure&) {
        throw;
      } catch (const std::exception& e) {
        res.failures.push_back({cfg.stage_id, seed, e.what()});
      }
    }
  }
  if (!res.rows.empty()) write_reports(out_dir, res.rows);
  return res;
}

}  // namespace bab::harness
