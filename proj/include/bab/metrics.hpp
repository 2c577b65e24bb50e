#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "bab/engine.hpp"
#include "bab/replay.hpp"

namespace bab::metrics {

inline constexpr double kDistanceUnit = 32.0;

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reduction in L1 distance to the target, in 32-px units.
inline double forward_distance(Position start, Position end, Position target) {
  return (l1_distance(start, target) - l1_distance(end, target)) / kDistanceUnit;
}

inline double format_accuracy(const std::vector<TurnRecord>& records) {
  if (records.empty()) throw MetricsError("format accuracy of an empty record list");
  const auto ok = std::count_if(records.begin(), records.end(), [](const TurnRecord& r) { return r.parsed.format_ok; });
  return static_cast<double>(ok) / static_cast<double>(records.size());
}

// True when moving one step in `dir` strictly shrinks the L1 gap to `objective`.
inline bool move_reduces_distance(Position from, Orientation dir, Position objective) {
  return l1_distance(translated(from, dir, kMoveStep), objective) < l1_distance(from, objective);
}

// Share of formatted moves heading toward the objective recorded at decision
// time. The default denominator counts formatted moves only; `Formatted`
// counts every formatted turn, shots included.
inline std::optional<double> move_accuracy(const std::vector<TurnRecord>& records,
                                           MaccDenominator mode = MaccDenominator::Moves) {
  int correct = 0;
  int moves = 0;
  int formatted = 0;
  for (const auto& r : records) {
    if (!r.parsed.format_ok || !r.parsed.action) continue;
    ++formatted;
    if (!is_move(*r.parsed.action)) continue;
    ++moves;
    if (r.objective && move_reduces_distance(r.pos_before, move_direction(*r.parsed.action), *r.objective)) ++correct;
  }
  if (moves == 0) return std::nullopt;
  const int denom = mode == MaccDenominator::Moves ? moves : formatted;
  return static_cast<double>(correct) / static_cast<double>(denom);
}

inline int episode_score(const std::vector<TurnRecord>& records, const std::vector<int>& primary_ids,
                         const std::vector<int>& known_ids) {
  const std::set<int> known(known_ids.begin(), known_ids.end());
  for (int id : primary_ids) {
    if (!known.count(id)) throw MetricsError("unknown agent id " + std::to_string(id));
  }
  const std::set<int> primary(primary_ids.begin(), primary_ids.end());
  int score = 0;
  for (const auto& r : records)
    if (primary.count(r.agent_id)) score += r.score_delta;
  return score;
}

inline double goal_completion(double f_dis, double initial_distance) {
  if (initial_distance == 0.0) throw MetricsError("goal completion with zero initial distance");
  return std::clamp(f_dis / initial_distance, -1.0, 1.0);
}

// Agents scored for the model under evaluation: the first agent, or the first
// team of agents; stage 3 is cooperative so both agents count.
inline std::vector<int> primary_agent_ids(const StageConfig& c) {
  std::vector<int> ids;
  switch (c.stage_id) {
    case 3:
      for (int i = 0; i < c.n_agents; ++i) ids.push_back(i + 1);
      break;
    case 5:
    case 7:
    case 4:
      for (int i = 0; i < c.n_agents; ++i)
        if (engine::team_of_agent(c, i) == 0) ids.push_back(i + 1);
      break;
    default:
      ids.push_back(1);
      break;
  }
  return ids;
}

// Episode metrics from a replay log. F Dis is the mean over primary agents;
// F Acc and M Acc pool the primary agents' turns; scores are summed.
inline EpisodeMetrics episode_metrics(const EpisodeLog& log) {
  const LogHeader& h = log.header;
  const std::vector<int> primary = h.primary_ids();
  if (primary.empty()) throw MetricsError("log has no primary agent");
  std::vector<int> known;
  for (const auto& a : h.agents) known.push_back(a.id);

  std::vector<TurnRecord> mine;
  std::vector<TurnRecord> all;
  std::map<int, Position> last_pos;
  for (const auto& a : h.agents) last_pos[a.id] = a.start;
  for (const auto& t : log.turns) {
    all.push_back(t.record);
    last_pos[t.record.agent_id] = t.record.pos_after;
    if (std::find(primary.begin(), primary.end(), t.record.agent_id) != primary.end()) mine.push_back(t.record);
  }

  EpisodeMetrics m;
  double dis_sum = 0.0;
  int dis_n = 0;
  double initial_sum = 0.0;
  for (const auto& a : h.agents) {
    if (a.role != "primary" || !a.distance_target) continue;
    dis_sum += forward_distance(a.start, last_pos[a.id], *a.distance_target);
    initial_sum += l1_distance(a.start, *a.distance_target) / kDistanceUnit;
    ++dis_n;
  }
  if (dis_n > 0) m.f_dis = dis_sum / dis_n;
  m.f_acc = mine.empty() ? 0.0 : format_accuracy(mine);
  m.m_acc = move_accuracy(mine, h.macc);
  m.score = episode_score(all, primary, known);
  if (h.config.is_navigation() && dis_n > 0 && initial_sum > 0.0) {
    m.goal_completion = goal_completion(m.f_dis, initial_sum / dis_n);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Aggregation

struct EpisodeRow {
  int stage = 0;
  std::string model;
  int run = 0;
  std::uint64_t seed = 0;
  EpisodeMetrics metrics;
  std::string end_reason;
  int turns = 0;
};

struct StageSummary {
  int stage = 0;
  std::string model;
  int runs = 0;
  double f_dis = 0.0;
  double f_acc = 0.0;
  std::optional<double> m_acc;  // mean over episodes that made a move
  double score = 0.0;
  std::optional<double> goal_completion;
};

struct Report {
  std::vector<StageSummary> stages;  // sorted by (model, stage)
  // Mean of stage means per model, over navigation stages and battle stages.
  std::map<std::string, double> avg_distance;
  std::map<std::string, double> avg_score_level2;
  std::map<std::string, double> avg_score_level3;
};

inline int level_of_stage(int stage_id) { return stage_id <= 2 ? 1 : stage_id <= 4 ? 2 : 3; }

inline Report aggregate(const std::vector<EpisodeRow>& rows) {
  if (rows.empty()) throw MetricsError("nothing to aggregate");
  std::map<std::pair<std::string, int>, std::vector<const EpisodeRow*>> groups;
  for (const auto& r : rows) groups[{r.model, r.stage}].push_back(&r);

  Report rep;
  std::map<std::string, std::vector<double>> dis, lvl2, lvl3;
  for (const auto& [key, members] : groups) {
    StageSummary s;
    s.model = key.first;
    s.stage = key.second;
    s.runs = static_cast<int>(members.size());
    double macc_sum = 0.0;
    int macc_n = 0;
    double gc_sum = 0.0;
    int gc_n = 0;
    for (const EpisodeRow* r : members) {
      s.f_dis += r->metrics.f_dis;
      s.f_acc += r->metrics.f_acc;
      s.score += r->metrics.score;
      if (r->metrics.m_acc) {
        macc_sum += *r->metrics.m_acc;
        ++macc_n;
      }
      if (r->metrics.goal_completion) {
        gc_sum += *r->metrics.goal_completion;
        ++gc_n;
      }
    }
    s.f_dis /= s.runs;
    s.f_acc /= s.runs;
    s.score /= s.runs;
    if (macc_n > 0) s.m_acc = macc_sum / macc_n;
    if (gc_n > 0) s.goal_completion = gc_sum / gc_n;
    switch (level_of_stage(s.stage)) {
      case 1: dis[s.model].push_back(s.f_dis); break;
      case 2: lvl2[s.model].push_back(s.score); break;
      default: lvl3[s.model].push_back(s.score); break;
    }
    rep.stages.push_back(s);
  }
  auto mean_into = [](const std::map<std::string, std::vector<double>>& src, std::map<std::string, double>& dst) {
    for (const auto& [model, xs] : src) {
      double sum = 0.0;
      for (double x : xs) sum += x;
      dst[model] = sum / static_cast<double>(xs.size());
    }
  };
  mean_into(dis, rep.avg_distance);
  mean_into(lvl2, rep.avg_score_level2);
  mean_into(lvl3, rep.avg_score_level3);
  return rep;
}

}  // namespace bab::metrics
