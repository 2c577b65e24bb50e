#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bab/geometry.hpp"

namespace bab {

enum class Goal : std::uint8_t {
  Navigation,
  CooperativeTask,
  CompetitiveTask,
  StaticCoop,
  DynamicCoop,
  HybridCoop,
};

enum class CoopTopology : std::uint8_t { None, IntraTeam, InterTeam, Both };

inline std::string_view goal_name(Goal g) {
  switch (g) {
    case Goal::Navigation: return "Navigation";
    case Goal::CooperativeTask: return "CooperativeTask";
    case Goal::CompetitiveTask: return "CompetitiveTask";
    case Goal::StaticCoop: return "StaticCoop";
    case Goal::DynamicCoop: return "DynamicCoop";
    case Goal::HybridCoop: return "HybridCoop";
  }
  return "?";
}

inline std::string_view topology_name(CoopTopology t) {
  switch (t) {
    case CoopTopology::None: return "None";
    case CoopTopology::IntraTeam: return "IntraTeam";
    case CoopTopology::InterTeam: return "InterTeam";
    case CoopTopology::Both: return "Both";
  }
  return "?";
}

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Goal goal_from_name(std::string_view s) {
  for (Goal g : {Goal::Navigation, Goal::CooperativeTask, Goal::CompetitiveTask, Goal::StaticCoop,
                 Goal::DynamicCoop, Goal::HybridCoop}) {
    if (goal_name(g) == s) return g;
  }
  throw ConfigError("unknown goal '" + std::string(s) + "'");
}

inline CoopTopology topology_from_name(std::string_view s) {
  for (CoopTopology t : {CoopTopology::None, CoopTopology::IntraTeam, CoopTopology::InterTeam,
                         CoopTopology::Both}) {
    if (topology_name(t) == s) return t;
  }
  throw ConfigError("unknown coop_topology '" + std::string(s) + "'");
}

struct StageConfig {
  int stage_id = 1;
  int turn_cap = 60;
  int n_agents = 1;
  int n_teams = 1;
  int n_bases = 1;
  int n_npcs = 0;
  Goal goal = Goal::Navigation;
  CoopTopology coop_topology = CoopTopology::None;
  int spawn_jitter_cells = 2;
  // Probability, in thousandths, that a free 32x32 block receives a wall cluster.
  int wall_permille = 300;
  // Battle stages: optional 8-px wall ring around each base.
  bool base_walls = false;
  // Explicit spawn positions; when non-empty they replace the generated layout
  // for that entity class and are not jittered.
  std::vector<Position> agent_positions;
  std::vector<Position> base_positions;
  std::vector<Position> npc_positions;

  bool is_navigation() const { return goal == Goal::Navigation; }

  friend bool operator==(const StageConfig&, const StageConfig&) = default;
};

// Appendix stage table: turns / agents / teams / NPCs / goal, plus the base and
// cooperation layout each stage implies.
inline StageConfig default_stage(int stage_id) {
  StageConfig c;
  c.stage_id = stage_id;
  switch (stage_id) {
    case 1:
      c.turn_cap = 60; c.n_agents = 1; c.n_teams = 1; c.n_bases = 1; c.n_npcs = 0;
      c.goal = Goal::Navigation; c.coop_topology = CoopTopology::None;
      break;
    case 2:
      c.turn_cap = 60; c.n_agents = 1; c.n_teams = 1; c.n_bases = 1; c.n_npcs = 10;
      c.goal = Goal::Navigation; c.coop_topology = CoopTopology::None;
      break;
    case 3:
      c.turn_cap = 80; c.n_agents = 2; c.n_teams = 1; c.n_bases = 2; c.n_npcs = 10;
      c.goal = Goal::CooperativeTask; c.coop_topology = CoopTopology::IntraTeam;
      break;
    case 4:
      c.turn_cap = 80; c.n_agents = 2; c.n_teams = 2; c.n_bases = 2; c.n_npcs = 10;
      c.goal = Goal::CompetitiveTask; c.coop_topology = CoopTopology::None;
      break;
    case 5:
      c.turn_cap = 80; c.n_agents = 4; c.n_teams = 2; c.n_bases = 2; c.n_npcs = 10;
      c.goal = Goal::StaticCoop; c.coop_topology = CoopTopology::IntraTeam;
      break;
    case 6:
      c.turn_cap = 80; c.n_agents = 4; c.n_teams = 4; c.n_bases = 4; c.n_npcs = 10;
      c.goal = Goal::DynamicCoop; c.coop_topology = CoopTopology::InterTeam;
      break;
    case 7:
      c.turn_cap = 80; c.n_agents = 6; c.n_teams = 3; c.n_bases = 3; c.n_npcs = 10;
      c.goal = Goal::HybridCoop; c.coop_topology = CoopTopology::Both;
      break;
    default:
      throw ConfigError("invalid stage id " + std::to_string(stage_id) + " (expected 1..7)");
  }
  return c;
}

struct StageOverrides {
  std::optional<int> turn_cap;
  std::optional<int> n_agents;
  std::optional<int> n_teams;
  std::optional<int> n_bases;
  std::optional<int> n_npcs;
  std::optional<Goal> goal;
  std::optional<CoopTopology> coop_topology;
  std::optional<int> spawn_jitter_cells;
  std::optional<int> wall_permille;
  std::optional<bool> base_walls;
  std::optional<std::vector<Position>> agent_positions;
  std::optional<std::vector<Position>> base_positions;
  std::optional<std::vector<Position>> npc_positions;

  static StageOverrides from_config(const StageConfig& c) {
    StageOverrides o;
    o.turn_cap = c.turn_cap;
    o.n_agents = c.n_agents;
    o.n_teams = c.n_teams;
    o.n_bases = c.n_bases;
    o.n_npcs = c.n_npcs;
    o.goal = c.goal;
    o.coop_topology = c.coop_topology;
    o.spawn_jitter_cells = c.spawn_jitter_cells;
    o.wall_permille = c.wall_permille;
    o.base_walls = c.base_walls;
    o.agent_positions = c.agent_positions;
    o.base_positions = c.base_positions;
    o.npc_positions = c.npc_positions;
    return o;
  }
};

// Number of teams that own a base. Stages where bases outnumber agent teams
// (stage 3) get tank-less enemy teams.
inline int base_team_count(const StageConfig& c) {
  return c.is_navigation() ? c.n_teams : std::max(c.n_teams, c.n_bases);
}

inline void validate(const StageConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid stage config: " + what);
  };
  require(c.stage_id >= 1 && c.stage_id <= 7, "stage_id must be in 1..7");
  require(c.turn_cap >= 1, "turns must be >= 1");
  require(c.n_agents >= 1, "agents must be >= 1");
  require(c.n_teams >= 1 && c.n_teams <= c.n_agents, "teams must be in 1..agents");
  require(c.n_npcs >= 0, "npcs must be >= 0");
  require(c.spawn_jitter_cells >= 0 && c.spawn_jitter_cells < kBlockCells, "spawn_jitter_cells out of range");
  require(c.wall_permille >= 0 && c.wall_permille <= 1000, "wall_density must be in [0,1]");
  if (c.is_navigation()) {
    require(c.n_bases == 1, "navigation stages have exactly one base");
  } else {
    require(c.n_bases >= c.n_teams, "each team needs a base");
  }
  if (c.base_positions.empty()) require(c.n_bases <= 4, "more than 4 bases need explicit base_positions");
  require(c.agent_positions.empty() || static_cast<int>(c.agent_positions.size()) == c.n_agents,
          "agent_positions count must equal agents");
  require(c.base_positions.empty() || static_cast<int>(c.base_positions.size()) == c.n_bases,
          "base_positions count must equal bases");
  require(c.npc_positions.empty() || static_cast<int>(c.npc_positions.size()) == c.n_npcs,
          "npc_positions count must equal npcs");
}

inline StageConfig apply_overrides(StageConfig c, const StageOverrides& o) {
  if (o.turn_cap) c.turn_cap = *o.turn_cap;
  if (o.n_agents) c.n_agents = *o.n_agents;
  if (o.n_teams) c.n_teams = *o.n_teams;
  if (o.n_bases) c.n_bases = *o.n_bases;
  if (o.n_npcs) c.n_npcs = *o.n_npcs;
  if (o.goal) c.goal = *o.goal;
  if (o.coop_topology) c.coop_topology = *o.coop_topology;
  if (o.spawn_jitter_cells) c.spawn_jitter_cells = *o.spawn_jitter_cells;
  if (o.wall_permille) c.wall_permille = *o.wall_permille;
  if (o.base_walls) c.base_walls = *o.base_walls;
  if (o.agent_positions) c.agent_positions = *o.agent_positions;
  if (o.base_positions) c.base_positions = *o.base_positions;
  if (o.npc_positions) c.npc_positions = *o.npc_positions;
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------
// Plain-text config files: one `key = value` per line, `#` starts a comment.

struct KeyValue {
  std::string key;
  std::string value;
  int line = 0;
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<KeyValue> parse_key_values(std::string_view text) {
  std::vector<KeyValue> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(n) + ": expected 'key = value'");
    }
    KeyValue kv{trim(t.substr(0, eq)), trim(t.substr(eq + 1)), n};
    if (kv.key.empty()) throw ConfigError("line " + std::to_string(n) + ": empty key");
    out.push_back(std::move(kv));
  }
  return out;
}

inline int parse_int(const KeyValue& kv) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(kv.value, &used);
    if (used != kv.value.size()) throw std::invalid_argument(kv.value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(kv.line) + ": '" + kv.key + "' expects an integer");
  }
}

// "x,y; x,y; ..."
inline std::vector<Position> parse_positions(const KeyValue& kv) {
  std::vector<Position> out;
  std::istringstream in(kv.value);
  std::string item;
  while (std::getline(in, item, ';')) {
    const std::string t = trim(item);
    if (t.empty()) continue;
    const auto comma = t.find(',');
    if (comma == std::string::npos) {
      throw ConfigError("line " + std::to_string(kv.line) + ": position '" + t + "' must be 'x,y'");
    }
    KeyValue xs{kv.key, trim(t.substr(0, comma)), kv.line};
    KeyValue ys{kv.key, trim(t.substr(comma + 1)), kv.line};
    out.push_back({parse_int(xs), parse_int(ys)});
  }
  return out;
}

// Consumes the stage keys it knows; returns the rest untouched so callers can
// layer their own keys in the same file.
inline std::pair<StageOverrides, std::vector<KeyValue>> parse_stage_overrides(
    const std::vector<KeyValue>& kvs) {
  StageOverrides o;
  std::vector<KeyValue> rest;
  for (const auto& kv : kvs) {
    if (kv.key == "turns") o.turn_cap = parse_int(kv);
    else if (kv.key == "agents") o.n_agents = parse_int(kv);
    else if (kv.key == "teams") o.n_teams = parse_int(kv);
    else if (kv.key == "bases") o.n_bases = parse_int(kv);
    else if (kv.key == "npcs") o.n_npcs = parse_int(kv);
    else if (kv.key == "spawn_jitter_cells") o.spawn_jitter_cells = parse_int(kv);
    else if (kv.key == "wall_density") {
      double d = 0;
      try {
        d = std::stod(kv.value);
      } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(kv.line) + ": wall_density expects a number");
      }
      if (d < 0.0 || d > 1.0) throw ConfigError("line " + std::to_string(kv.line) + ": wall_density must be in [0,1]");
      o.wall_permille = static_cast<int>(std::lround(d * 1000.0));
    } else if (kv.key == "base_walls") o.base_walls = parse_int(kv) != 0;
    else if (kv.key == "goal") o.goal = goal_from_name(kv.value);
    else if (kv.key == "coop_topology") o.coop_topology = topology_from_name(kv.value);
    else if (kv.key == "agent_positions") o.agent_positions = parse_positions(kv);
    else if (kv.key == "base_positions") o.base_positions = parse_positions(kv);
    else if (kv.key == "npc_positions") o.npc_positions = parse_positions(kv);
    else rest.push_back(kv);
  }
  return {std::move(o), std::move(rest)};
}

inline StageOverrides parse_stage_overrides(std::string_view text) {
  auto [o, rest] = parse_stage_overrides(parse_key_values(text));
  if (!rest.empty()) {
    throw ConfigError("line " + std::to_string(rest.front().line) + ": unknown key '" + rest.front().key + "'");
  }
  return o;
}

}  // namespace bab
