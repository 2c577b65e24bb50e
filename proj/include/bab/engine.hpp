#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "bab/action.hpp"
#include "bab/geometry.hpp"
#include "bab/rng.hpp"
#include "bab/stage.hpp"
#include "bab/world.hpp"

namespace bab {

class EngineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LoadError : public EngineError {
 public:
  using EngineError::EngineError;
};

enum class Blocker : std::uint8_t { None, Wall, Tank, Base, Boundary };

inline std::string_view blocker_name(Blocker b) {
  switch (b) {
    case Blocker::None: return "None";
    case Blocker::Wall: return "Wall";
    case Blocker::Tank: return "Tank";
    case Blocker::Base: return "Base";
    case Blocker::Boundary: return "Boundary";
  }
  return "";
}

struct MoveOutcome {
  bool moved = false;
  Blocker blocker = Blocker::None;
};

enum class ShotKind : std::uint8_t { NoHit, HitWall, HitTank, HitBase };

struct ShootOutcome {
  ShotKind kind = ShotKind::NoHit;
  std::vector<int> cells;  // HitWall: wall cell indices removed (one or two)
  int target_id = 0;       // HitTank / HitBase
  bool destroyed = false;  // HitTank: health reached 0; HitBase: always true
  bool enemy = false;      // target is not on the shooter's team
  int score_delta = 0;

  friend bool operator==(const ShootOutcome&, const ShootOutcome&) = default;
};

enum class ResolutionKind : std::uint8_t { NoOp, Moved, Blocked, HitWall, HitTank, HitBase, NoHit, Dead };

inline std::string_view resolution_name(ResolutionKind k) {
  switch (k) {
    case ResolutionKind::NoOp: return "NoOp";
    case ResolutionKind::Moved: return "Moved";
    case ResolutionKind::Blocked: return "Blocked";
    case ResolutionKind::HitWall: return "HitWall";
    case ResolutionKind::HitTank: return "HitTank";
    case ResolutionKind::HitBase: return "HitBase";
    case ResolutionKind::NoHit: return "NoHit";
    case ResolutionKind::Dead: return "Dead";
  }
  return "";
}

inline std::optional<ResolutionKind> resolution_from_name(std::string_view s) {
  for (ResolutionKind k : {ResolutionKind::NoOp, ResolutionKind::Moved, ResolutionKind::Blocked,
                           ResolutionKind::HitWall, ResolutionKind::HitTank, ResolutionKind::HitBase,
                           ResolutionKind::NoHit, ResolutionKind::Dead}) {
    if (resolution_name(k) == s) return k;
  }
  return std::nullopt;
}

// What happened to one agent's action within a turn.
struct Resolution {
  ResolutionKind kind = ResolutionKind::NoOp;
  Blocker blocker = Blocker::None;
  std::vector<int> cells;
  int target_id = 0;
  bool destroyed = false;
  bool enemy = false;

  friend bool operator==(const Resolution&, const Resolution&) = default;
};

inline Resolution to_resolution(const MoveOutcome& m) {
  Resolution r;
  r.kind = m.moved ? ResolutionKind::Moved : ResolutionKind::Blocked;
  r.blocker = m.blocker;
  return r;
}

inline Resolution to_resolution(const ShootOutcome& s) {
  Resolution r;
  switch (s.kind) {
    case ShotKind::NoHit: r.kind = ResolutionKind::NoHit; break;
    case ShotKind::HitWall: r.kind = ResolutionKind::HitWall; break;
    case ShotKind::HitTank: r.kind = ResolutionKind::HitTank; break;
    case ShotKind::HitBase: r.kind = ResolutionKind::HitBase; break;
  }
  r.cells = s.cells;
  r.target_id = s.target_id;
  r.destroyed = s.destroyed;
  r.enemy = s.enemy;
  return r;
}

// Per-agent per-turn log entry.
struct TurnRecord {
  int turn = 0;
  int agent_id = 0;
  std::string prompt_digest;
  ParsedAction parsed;  // parsed.raw holds the reply text
  Resolution resolution;
  Position pos_before;
  Position pos_after;
  int score_delta = 0;
  std::optional<Position> objective;  // move-accuracy objective at decision time
  std::string error;                  // backend failure note, if any
  std::string world_hash;             // canonical hash after the turn resolved
};

namespace engine {

// ---------------------------------------------------------------------------
// Stage loading

namespace detail {

struct Placed {
  std::string name;
  Rect rect;
};

inline Position block_pos(int bx, int by) { return {bx * kMoveStep, by * kMoveStep}; }

inline std::string describe(const std::string& kind, int id, Position p) {
  return kind + " " + std::to_string(id) + " at (" + std::to_string(p.x) + "," + std::to_string(p.y) + ")";
}

inline const Placed* first_overlap(const std::vector<Placed>& placed, const Rect& r) {
  for (const auto& p : placed)
    if (p.rect.intersects(r)) return &p;
  return nullptr;
}

inline void check_explicit(Position p, const std::string& name) {
  if (!on_grid(p) || !Rect::footprint(p, kTankSize).inside_map()) {
    throw LoadError(name + " is off the 8-px grid or outside the map");
  }
}

// Corner anchors, in spawn blocks: bottom-left, top-right, top-left, bottom-right.
inline constexpr int kCornerBlocks[4][2] = {{1, 14}, {14, 1}, {1, 1}, {14, 14}};
inline constexpr int kNavBaseBlock[2] = {12, 3};
inline constexpr int kNavAgentBlock[2] = {3, 12};
// NPCs spawn at least this many blocks (L-infinity) from agents and bases.
inline constexpr int kNpcClearanceBlocks = 2;

// k-th spawn offset (in blocks) around an anchor, pointing into the map.
inline Position spawn_offset(int k, int ax, int ay, bool include_origin) {
  static constexpr int kOffsets[][2] = {{2, 0}, {0, 2}, {2, 2}, {4, 0}, {0, 4}, {4, 2}, {2, 4}, {4, 4},
                                        {6, 0}, {0, 6}, {6, 2}, {2, 6}, {6, 4}, {4, 6}, {6, 6}};
  const int sx = ax < kBlockCells / 2 ? 1 : -1;
  const int sy = ay < kBlockCells / 2 ? 1 : -1;
  if (include_origin) {
    if (k == 0) return {ax, ay};
    --k;
  }
  const int n = static_cast<int>(std::size(kOffsets));
  const int ring = k / n;
  const auto& o = kOffsets[k % n];
  return {ax + sx * (o[0] + ring), ay + sy * (o[1] + ring)};
}

inline int clamp_block(int b) { return std::clamp(b, 0, kBlockCells - 1); }

}  // namespace detail

inline int team_of_agent(const StageConfig& c, int agent_index) {
  return agent_index * c.n_teams / c.n_agents;
}

// Builds a world from a complete stage configuration.
inline WorldState load_stage(const StageConfig& config, std::uint64_t seed) {
  using detail::Placed;
  validate(config);
  WorldState w;
  w.config = config;
  const StageConfig& c = w.config;
  w.seed = seed;
  w.rng_world = RandomStream(mix_seed(seed, 1));
  w.rng_npc = RandomStream(mix_seed(seed, 2));
  RandomStream& rng = w.rng_world;

  std::vector<Placed> placed;
  auto place = [&](const std::string& name, Position p) {
    const Rect r = Rect::footprint(p, kTankSize);
    if (const Placed* other = detail::first_overlap(placed, r)) {
      throw LoadError("spawn collision: " + name + " overlaps " + other->name);
    }
    placed.push_back({name, r});
  };

  const int base_id0 = c.n_agents + c.n_npcs + 1;

  // Bases.
  for (int i = 0; i < c.n_bases; ++i) {
    Base b;
    b.id = base_id0 + i;
    b.team = c.is_navigation() ? 0 : i;
    b.goal_marker = c.is_navigation();
    if (!c.base_positions.empty()) {
      b.pos = c.base_positions[static_cast<std::size_t>(i)];
      detail::check_explicit(b.pos, detail::describe("base", b.id, b.pos));
    } else if (c.is_navigation()) {
      b.pos = detail::block_pos(detail::kNavBaseBlock[0], detail::kNavBaseBlock[1]);
    } else {
      b.pos = detail::block_pos(detail::kCornerBlocks[i][0], detail::kCornerBlocks[i][1]);
    }
    place(detail::describe("base", b.id, b.pos), b.pos);
    w.bases.push_back(b);
  }

  // Protective rings: the 8-px border of cells around each battle base.
  if (c.base_walls && !c.is_navigation()) {
    for (const auto& b : w.bases) {
      const Rect ring{b.pos.x - kCellSize, b.pos.y - kCellSize, kBaseSize + 2 * kCellSize, kBaseSize + 2 * kCellSize};
      if (const Placed* other = detail::first_overlap(placed, ring); other && other->name != detail::describe("base", b.id, b.pos)) {
        throw LoadError("spawn collision: wall ring of base " + std::to_string(b.id) + " overlaps " + other->name);
      }
    }
    for (const auto& b : w.bases) {
      const int cx0 = b.pos.x / kCellSize - 1;
      const int cy0 = b.pos.y / kCellSize - 1;
      const int n = kBaseSize / kCellSize + 2;
      for (int dy = 0; dy < n; ++dy)
        for (int dx = 0; dx < n; ++dx) {
          const bool border = dx == 0 || dy == 0 || dx == n - 1 || dy == n - 1;
          const int cx = cx0 + dx;
          const int cy = cy0 + dy;
          if (border && cx >= 0 && cy >= 0 && cx < kGridCells && cy < kGridCells) w.walls.set(cx, cy, true);
        }
      placed.push_back({"wall ring of base " + std::to_string(b.id),
                        {b.pos.x - kCellSize, b.pos.y - kCellSize, kBaseSize + 2 * kCellSize, kBaseSize + 2 * kCellSize}});
    }
  }

  // Agents: anchored near their base (or the navigation start), then jittered.
  std::map<int, int> team_slot;
  for (int i = 0; i < c.n_agents; ++i) {
    Tank t;
    t.id = i + 1;
    t.kind = TankKind::Agent;
    t.team = team_of_agent(c, i);
    t.health = kAgentHealth;
    t.coop_capable = true;
    const int slot = team_slot[t.team]++;
    if (!c.agent_positions.empty()) {
      t.pos = c.agent_positions[static_cast<std::size_t>(i)];
      detail::check_explicit(t.pos, detail::describe("agent", t.id, t.pos));
      place(detail::describe("agent", t.id, t.pos), t.pos);
    } else {
      Position anchor_block;
      if (c.is_navigation()) {
        anchor_block = detail::spawn_offset(slot, detail::kNavAgentBlock[0], detail::kNavAgentBlock[1], true);
      } else {
        const Base* own = w.base_of_team(t.team);
        const int ax = own->pos.x / kMoveStep;
        const int ay = own->pos.y / kMoveStep;
        anchor_block = detail::spawn_offset(slot, ax, ay, false);
      }
      anchor_block = {detail::clamp_block(anchor_block.x), detail::clamp_block(anchor_block.y)};
      const int j = c.spawn_jitter_cells;
      std::optional<Position> chosen;
      for (int attempt = 0; attempt < 16 && !chosen; ++attempt) {
        const int dx = rng.between(-j, j);
        const int dy = rng.between(-j, j);
        const Position p = detail::block_pos(detail::clamp_block(anchor_block.x + dx),
                                             detail::clamp_block(anchor_block.y + dy));
        if (!detail::first_overlap(placed, Rect::footprint(p, kTankSize))) chosen = p;
      }
      t.pos = chosen.value_or(detail::block_pos(anchor_block.x, anchor_block.y));
      place(detail::describe("agent", t.id, t.pos), t.pos);
    }
    t.facing = t.pos.y >= kMapSize / 2 ? Orientation::Up : Orientation::Down;
    w.tanks.push_back(t);
  }

  // NPC explicit positions are reserved before walls are generated.
  if (!c.npc_positions.empty()) {
    for (int i = 0; i < c.n_npcs; ++i) {
      const Position p = c.npc_positions[static_cast<std::size_t>(i)];
      const int id = c.n_agents + 1 + i;
      detail::check_explicit(p, detail::describe("npc", id, p));
      place(detail::describe("npc", id, p), p);
    }
  }

  // Wall clusters on free 32x32 blocks, one block of clearance around entities.
  for (int by = 0; by < kBlockCells; ++by) {
    for (int bx = 0; bx < kBlockCells; ++bx) {
      const Rect block = Rect::footprint(detail::block_pos(bx, by), kMoveStep);
      const Rect grown{block.x - kMoveStep, block.y - kMoveStep, 3 * kMoveStep, 3 * kMoveStep};
      if (detail::first_overlap(placed, grown)) continue;
      if (rng.below(1000) >= c.wall_permille) continue;
      const int pattern = rng.below(5);  // full, top, bottom, left, right half
      const int cx0 = bx * 4;
      const int cy0 = by * 4;
      for (int dy = 0; dy < 4; ++dy) {
        for (int dx = 0; dx < 4; ++dx) {
          const bool on = pattern == 0 || (pattern == 1 && dy < 2) || (pattern == 2 && dy >= 2) ||
                          (pattern == 3 && dx < 2) || (pattern == 4 && dx >= 2);
          if (on) w.walls.set(cx0 + dx, cy0 + dy, true);
        }
      }
    }
  }

  // NPCs.
  for (int i = 0; i < c.n_npcs; ++i) {
    Tank t;
    t.id = c.n_agents + 1 + i;
    t.kind = TankKind::Npc;
    t.team = kNoTeam;
    t.health = kNpcHealth;
    t.coop_capable = false;
    if (!c.npc_positions.empty()) {
      t.pos = c.npc_positions[static_cast<std::size_t>(i)];
      if (w.walls.any_in(Rect::footprint(t.pos, kTankSize))) {
        throw LoadError("spawn collision: " + detail::describe("npc", t.id, t.pos) + " overlaps a wall");
      }
    } else {
      std::vector<Position> free;
      for (int by = 0; by < kBlockCells; ++by) {
        for (int bx = 0; bx < kBlockCells; ++bx) {
          const Position p = detail::block_pos(bx, by);
          const Rect r = Rect::footprint(p, kTankSize);
          if (w.walls.any_in(r)) continue;
          const int k = detail::kNpcClearanceBlocks;
          const Rect grown{r.x - k * kMoveStep, r.y - k * kMoveStep, (2 * k + 1) * kMoveStep, (2 * k + 1) * kMoveStep};
          bool clear = true;
          for (const auto& pl : placed) {
            const bool is_npc = pl.name.rfind("npc", 0) == 0;
            if (pl.rect.intersects(is_npc ? r : grown)) {
              clear = false;
              break;
            }
          }
          if (clear) free.push_back(p);
        }
      }
      if (free.empty()) throw LoadError("no free spawn block left for npc " + std::to_string(t.id));
      t.pos = free[static_cast<std::size_t>(rng.below(static_cast<int>(free.size())))];
      place(detail::describe("npc", t.id, t.pos), t.pos);
    }
    t.facing = kAllOrientations[rng.below(4)];
    w.tanks.push_back(t);
  }

  for (const auto& t : w.tanks) {
    if (w.walls.any_in(t.footprint())) {
      throw LoadError("spawn collision: " + detail::describe(t.is_agent() ? "agent" : "npc", t.id, t.pos) +
                      " overlaps a wall");
    }
  }
  for (const auto& b : w.bases) {
    if (w.walls.any_in(b.footprint())) {
      throw LoadError("spawn collision: " + detail::describe("base", b.id, b.pos) + " overlaps a wall");
    }
  }
  return w;
}

// Identical (stage_id, seed, overrides) yield identical worlds.
inline WorldState load_stage(int stage_id, std::uint64_t seed, const StageOverrides& overrides = {}) {
  return load_stage(apply_overrides(default_stage(stage_id), overrides), seed);
}

// ---------------------------------------------------------------------------
// Movement and shooting

inline Tank& live_tank(WorldState& w, int id) {
  Tank* t = w.find_tank(id);
  if (!t) throw EngineError("unknown entity id " + std::to_string(id));
  if (!t->alive()) throw EngineError("entity " + std::to_string(id) + " is dead");
  return *t;
}

inline void require_running(const WorldState& w) {
  if (!w.status.running()) throw EngineError("world has ended");
}

// Rotates unconditionally; advances 32 px when the target footprint is free.
inline MoveOutcome apply_move(WorldState& w, int entity_id, Orientation dir) {
  require_running(w);
  Tank& tank = live_tank(w, entity_id);
  tank.facing = dir;
  const Position next = translated(tank.pos, dir, kMoveStep);
  const Rect r = Rect::footprint(next, kTankSize);
  if (!r.inside_map()) return {false, Blocker::Boundary};
  if (w.walls.any_in(r)) return {false, Blocker::Wall};
  for (const auto& other : w.tanks) {
    if (other.id != tank.id && other.alive() && other.footprint().intersects(r)) return {false, Blocker::Tank};
  }
  for (const auto& b : w.bases) {
    if (b.solid() && b.footprint().intersects(r)) return {false, Blocker::Base};
  }
  tank.pos = next;
  return {true, Blocker::None};
}

// The 8-px deep slice of the bullet lane at step k (k >= 1) in front of a tank.
// The lane is the central 16 px of the shooter's 32-px face.
inline Rect ray_segment(Position shooter, Orientation facing, int k) {
  switch (facing) {
    case Orientation::Up: return {shooter.x + 8, shooter.y - kCellSize * k, 16, kCellSize};
    case Orientation::Down: return {shooter.x + 8, shooter.y + kTankSize + kCellSize * (k - 1), 16, kCellSize};
    case Orientation::Left: return {shooter.x - kCellSize * k, shooter.y + 8, kCellSize, 16};
    case Orientation::Right: return {shooter.x + kTankSize + kCellSize * (k - 1), shooter.y + 8, kCellSize, 16};
  }
  return {};
}

inline void eliminate_team(WorldState& w, int team) {
  if (team == kNoTeam) return;
  for (auto& t : w.tanks)
    if (t.is_agent() && t.team == team) t.health = 0;
  w.coop_pairs.erase(std::remove_if(w.coop_pairs.begin(), w.coop_pairs.end(),
                                    [&](const CoopPair& p) {
                                      const Tank* a = w.find_tank(p.a);
                                      const Tank* b = w.find_tank(p.b);
                                      return !a || !b || !a->alive() || !b->alive();
                                    }),
                     w.coop_pairs.end());
}

// Instantaneous hitscan along the shooter's facing; the first wall cell, live
// tank or intact base met by the lane is hit.
inline ShootOutcome apply_shoot(WorldState& w, int shooter_id) {
  require_running(w);
  Tank& shooter = live_tank(w, shooter_id);
  const bool scores = shooter.is_agent();
  ShootOutcome out;
  for (int k = 1;; ++k) {
    const Rect seg = ray_segment(shooter.pos, shooter.facing, k);
    if (!seg.inside_map()) return out;  // NoHit

    for (auto& t : w.tanks) {
      if (t.id == shooter.id || !t.alive() || !t.footprint().intersects(seg)) continue;
      out.kind = ShotKind::HitTank;
      out.target_id = t.id;
      out.enemy = t.kind == TankKind::Npc || t.team != shooter.team;
      t.health -= 1;
      out.destroyed = t.health == 0;
      if (out.destroyed) {
        w.coop_pairs.erase(std::remove_if(w.coop_pairs.begin(), w.coop_pairs.end(),
                                          [&](const CoopPair& p) { return p.involves(t.id); }),
                           w.coop_pairs.end());
      }
      if (scores && out.enemy) out.score_delta = kTankHitScore;
      shooter.score += out.score_delta;
      return out;
    }
    for (auto& b : w.bases) {
      if (!b.solid() || !b.footprint().intersects(seg)) continue;
      out.kind = ShotKind::HitBase;
      out.target_id = b.id;
      out.enemy = b.team != shooter.team;
      out.destroyed = true;
      b.destroyed = true;
      if (scores && out.enemy) out.score_delta = kBaseHitScore;
      shooter.score += out.score_delta;
      eliminate_team(w, b.team);
      return out;
    }
    for (int cy = seg.y / kCellSize; cy < seg.bottom() / kCellSize; ++cy) {
      for (int cx = seg.x / kCellSize; cx < seg.right() / kCellSize; ++cx) {
        if (w.walls.at(cx, cy)) out.cells.push_back(WallGrid::index(cx, cy));
      }
    }
    if (!out.cells.empty()) {
      out.kind = ShotKind::HitWall;
      for (int idx : out.cells) w.walls.clear_index(idx);
      return out;
    }
  }
}

// Uniform over the five actions, drawn from the NPC stream.
inline Action npc_policy(WorldState& w, int npc_id) {
  const Tank* t = w.find_tank(npc_id);
  if (!t || t->kind != TankKind::Npc) throw EngineError("not an npc: " + std::to_string(npc_id));
  return kAllActions[w.rng_npc.below(5)];
}

// ---------------------------------------------------------------------------
// Objectives and termination

inline Position center(Position p) { return {p.x + kTankSize / 2, p.y + kTankSize / 2}; }

inline const Base* nearest_enemy_base(const WorldState& w, const Tank& agent) {
  const Base* best = nullptr;
  int best_d = 0;
  for (const auto& b : w.bases) {
    if (b.destroyed || b.team == agent.team) continue;
    const int d = l1_distance(agent.pos, b.pos);
    if (!best || d < best_d) {
      best = &b;
      best_d = d;
    }
  }
  return best;
}

// Objective used to judge a move's direction: the goal base in navigation
// stages; otherwise the declared target when it names a live enemy tank or an
// intact enemy base, else the nearest intact enemy base.
inline std::optional<Position> resolve_objective(const WorldState& w, int agent_id, std::optional<int> target_id) {
  const Tank* agent = w.find_tank(agent_id);
  if (!agent) return std::nullopt;
  if (w.config.is_navigation()) {
    if (w.bases.empty()) return std::nullopt;
    return w.bases.front().pos;
  }
  if (target_id) {
    if (const Tank* t = w.find_tank(*target_id);
        t && t->alive() && t->id != agent->id && (t->kind == TankKind::Npc || t->team != agent->team)) {
      return t->pos;
    }
    if (const Base* b = w.find_base(*target_id); b && !b->destroyed && b->team != agent->team) return b->pos;
  }
  if (const Base* b = nearest_enemy_base(w, *agent)) return b->pos;
  return std::nullopt;
}

// Target for forward distance: the goal base, or the nearest enemy base at start.
inline std::optional<Position> distance_target(const WorldState& w, int agent_id) {
  const Tank* agent = w.find_tank(agent_id);
  if (!agent) return std::nullopt;
  if (w.config.is_navigation()) return w.bases.empty() ? std::nullopt : std::optional<Position>(w.bases.front().pos);
  if (const Base* b = nearest_enemy_base(w, *agent)) return b->pos;
  return std::nullopt;
}

inline bool reached_goal(const Tank& t, const Base& goal) {
  const Position a = center(t.pos);
  const Position b = center(goal.pos);
  return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)) < kTankSize;
}

inline Status check_termination(const WorldState& w) {
  Status s;
  const auto live = w.live_agent_ids();
  if (w.config.is_navigation()) {
    for (int id : live) {
      if (reached_goal(*w.find_tank(id), w.bases.front())) return {EndReason::GoalReached, w.find_tank(id)->team};
    }
    if (live.empty()) return {EndReason::AgentsEliminated, kNoTeam};
  } else {
    std::set<int> standing;
    for (const auto& b : w.bases)
      if (!b.destroyed) standing.insert(b.team);
    if (standing.size() <= 1) {
      return {EndReason::TeamVictory, standing.empty() ? kNoTeam : *standing.begin()};
    }
    if (live.empty()) return {EndReason::AgentsEliminated, kNoTeam};
  }
  if (w.turn >= w.config.turn_cap) return {EndReason::TurnCapReached, kNoTeam};
  return s;
}

// ---------------------------------------------------------------------------
// Turn resolution

// Applies one turn: live agents by ascending id, then NPCs by ascending id.
// Cooperation routing happens outside, before this call.
inline std::vector<TurnRecord> step_turn(WorldState& w, const std::map<int, ParsedAction>& actions) {
  require_running(w);
  const auto live = w.live_agent_ids();
  for (int id : live) {
    if (!actions.count(id)) throw EngineError("missing action for live agent " + std::to_string(id));
  }
  for (const auto& [id, _] : actions) {
    if (std::find(live.begin(), live.end(), id) == live.end()) {
      throw EngineError("action given for agent " + std::to_string(id) + " which is not a live agent");
    }
  }

  std::vector<TurnRecord> records;
  records.reserve(live.size());
  for (int id : live) {
    const Tank& t = *w.find_tank(id);
    TurnRecord r;
    r.turn = w.turn;
    r.agent_id = id;
    r.parsed = actions.at(id);
    r.pos_before = t.pos;
    r.objective = resolve_objective(w, id, r.parsed.target_id);
    records.push_back(std::move(r));
  }

  for (auto& r : records) {
    Tank& t = *w.find_tank(r.agent_id);
    if (!t.alive()) {
      r.resolution.kind = ResolutionKind::Dead;
      continue;
    }
    const ParsedAction& pa = r.parsed;
    if (!pa.format_ok || !pa.action) {
      r.resolution.kind = ResolutionKind::NoOp;
      continue;
    }
    if (is_move(*pa.action)) {
      r.resolution = to_resolution(apply_move(w, t.id, move_direction(*pa.action)));
    } else {
      const ShootOutcome s = apply_shoot(w, t.id);
      r.score_delta = s.score_delta;
      r.resolution = to_resolution(s);
    }
  }

  for (auto& t : w.tanks) {
    if (t.kind != TankKind::Npc || !t.alive()) continue;
    const Action a = npc_policy(w, t.id);
    if (is_move(a)) {
      apply_move(w, t.id, move_direction(a));
    } else {
      apply_shoot(w, t.id);
    }
  }

  w.last_targets.clear();
  for (const auto& r : records) {
    if (r.parsed.format_ok && r.parsed.target_id) w.last_targets[r.agent_id] = *r.parsed.target_id;
  }
  w.turn += 1;
  w.status = check_termination(w);

  const std::string hash = world_hash(w);
  for (auto& r : records) {
    r.pos_after = w.find_tank(r.agent_id)->pos;
    r.world_hash = hash;
  }
  return records;
}

}  // namespace engine
}  // namespace bab
