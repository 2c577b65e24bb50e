#pragma once

#include <algorithm>
#include <bitset>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bab/geometry.hpp"
#include "bab/rng.hpp"
#include "bab/stage.hpp"

namespace bab {

inline constexpr int kNoTeam = -1;
inline constexpr int kAgentHealth = 5;
inline constexpr int kNpcHealth = 1;
inline constexpr int kTankHitScore = 1;
inline constexpr int kBaseHitScore = 5;

enum class TankKind : std::uint8_t { Agent, Npc };

struct Tank {
  int id = 0;
  TankKind kind = TankKind::Agent;
  int team = kNoTeam;
  Position pos;
  Orientation facing = Orientation::Up;
  int health = 0;
  int score = 0;
  bool coop_capable = false;

  bool alive() const { return health > 0; }
  bool is_agent() const { return kind == TankKind::Agent; }
  Rect footprint() const { return Rect::footprint(pos, kTankSize); }
};

struct Base {
  int id = 0;
  int team = kNoTeam;
  Position pos;
  bool destroyed = false;
  // Navigation target: neither solid nor shootable, tanks may drive onto it.
  bool goal_marker = false;

  bool solid() const { return !destroyed && !goal_marker; }
  Rect footprint() const { return Rect::footprint(pos, kBaseSize); }
};

// 64x64 lattice of 8x8 wall cells, indexed row-major (cy * 64 + cx).
class WallGrid {
 public:
  static int index(int cx, int cy) { return cy * kGridCells + cx; }

  bool at(int cx, int cy) const {
    if (cx < 0 || cy < 0 || cx >= kGridCells || cy >= kGridCells) return false;
    return bits_.test(static_cast<std::size_t>(index(cx, cy)));
  }
  bool at_index(int i) const { return bits_.test(static_cast<std::size_t>(i)); }
  void set(int cx, int cy, bool present) { bits_.set(static_cast<std::size_t>(index(cx, cy)), present); }
  void clear_index(int i) { bits_.reset(static_cast<std::size_t>(i)); }
  int count() const { return static_cast<int>(bits_.count()); }

  bool any_in(const Rect& r) const {
    const int x0 = std::max(0, r.x / kCellSize);
    const int y0 = std::max(0, r.y / kCellSize);
    const int x1 = std::min(kGridCells, (r.right() + kCellSize - 1) / kCellSize);
    const int y1 = std::min(kGridCells, (r.bottom() + kCellSize - 1) / kCellSize);
    for (int cy = y0; cy < y1; ++cy)
      for (int cx = x0; cx < x1; ++cx)
        if (at(cx, cy)) return true;
    return false;
  }

  friend bool operator==(const WallGrid&, const WallGrid&) = default;

 private:
  std::bitset<kGridCells * kGridCells> bits_;
};

inline Rect wall_cell_rect(int index) {
  return {(index % kGridCells) * kCellSize, (index / kGridCells) * kCellSize, kCellSize, kCellSize};
}

enum class Disposition : std::uint8_t { Pending, Accepted, Rejected, Stopped };

inline std::string_view disposition_name(Disposition d) {
  switch (d) {
    case Disposition::Pending: return "Pending";
    case Disposition::Accepted: return "Accepted";
    case Disposition::Rejected: return "Rejected";
    case Disposition::Stopped: return "Stopped";
  }
  return "";
}

struct CoopMessage {
  int turn = 0;
  int from_id = 0;
  int to_id = 0;
  std::string body;
  Disposition disposition = Disposition::Pending;

  friend bool operator==(const CoopMessage&, const CoopMessage&) = default;
};

struct CoopPair {
  int a = 0;  // a < b
  int b = 0;
  int since_turn = 0;
  int refreshed_turn = 0;

  bool involves(int id) const { return a == id || b == id; }
  int partner_of(int id) const { return a == id ? b : a; }
};

enum class EndReason : std::uint8_t { None, GoalReached, TurnCapReached, TeamVictory, AgentsEliminated };

inline std::string_view end_reason_name(EndReason r) {
  switch (r) {
    case EndReason::None: return "Running";
    case EndReason::GoalReached: return "GoalReached";
    case EndReason::TurnCapReached: return "TurnCapReached";
    case EndReason::TeamVictory: return "TeamVictory";
    case EndReason::AgentsEliminated: return "AgentsEliminated";
  }
  return "";
}

inline std::optional<EndReason> end_reason_from_name(std::string_view s) {
  for (EndReason r : {EndReason::None, EndReason::GoalReached, EndReason::TurnCapReached,
                      EndReason::TeamVictory, EndReason::AgentsEliminated}) {
    if (end_reason_name(r) == s) return r;
  }
  return std::nullopt;
}

struct Status {
  EndReason reason = EndReason::None;
  int winner_team = kNoTeam;  // TeamVictory only; kNoTeam when every team fell

  bool running() const { return reason == EndReason::None; }
  friend bool operator==(const Status&, const Status&) = default;
};

struct WorldState {
  StageConfig config;
  std::uint64_t seed = 0;
  int turn = 0;
  std::vector<Tank> tanks;  // ascending id; agents first, then NPCs
  std::vector<Base> bases;  // ascending id
  WallGrid walls;
  std::vector<CoopMessage> coop_log;
  // Per-recipient indices into coop_log, shown in the next observation only.
  std::map<int, std::vector<int>> mailboxes;
  std::vector<CoopPair> coop_pairs;
  // Declared attack target of each agent in the previous turn.
  std::map<int, int> last_targets;
  RandomStream rng_world;
  RandomStream rng_npc;
  Status status;
  bool coop_enabled = true;

  Tank* find_tank(int id) {
    auto it = std::find_if(tanks.begin(), tanks.end(), [id](const Tank& t) { return t.id == id; });
    return it == tanks.end() ? nullptr : &*it;
  }
  const Tank* find_tank(int id) const {
    auto it = std::find_if(tanks.begin(), tanks.end(), [id](const Tank& t) { return t.id == id; });
    return it == tanks.end() ? nullptr : &*it;
  }
  Base* find_base(int id) {
    auto it = std::find_if(bases.begin(), bases.end(), [id](const Base& b) { return b.id == id; });
    return it == bases.end() ? nullptr : &*it;
  }
  const Base* find_base(int id) const {
    auto it = std::find_if(bases.begin(), bases.end(), [id](const Base& b) { return b.id == id; });
    return it == bases.end() ? nullptr : &*it;
  }

  std::vector<int> live_agent_ids() const {
    std::vector<int> ids;
    for (const auto& t : tanks)
      if (t.is_agent() && t.alive()) ids.push_back(t.id);
    return ids;
  }

  std::vector<int> agent_ids() const {
    std::vector<int> ids;
    for (const auto& t : tanks)
      if (t.is_agent()) ids.push_back(t.id);
    return ids;
  }

  // Base owned by `team`, if any.
  const Base* base_of_team(int team) const {
    for (const auto& b : bases)
      if (b.team == team) return &b;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Canonical byte form: fixed field order, little-endian integers.

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.append(s);
  }
  void pos(Position p) {
    i32(p.x);
    i32(p.y);
  }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

inline std::string serialize(const WorldState& w) {
  ByteWriter out;
  out.str("BABW1");
  const StageConfig& c = w.config;
  for (int v : {c.stage_id, c.turn_cap, c.n_agents, c.n_teams, c.n_bases, c.n_npcs,
                static_cast<int>(c.goal), static_cast<int>(c.coop_topology), c.spawn_jitter_cells,
                c.wall_permille, c.base_walls ? 1 : 0})
    out.i32(v);
  for (const auto* list : {&c.agent_positions, &c.base_positions, &c.npc_positions}) {
    out.u32(static_cast<std::uint32_t>(list->size()));
    for (Position p : *list) out.pos(p);
  }
  out.u64(w.seed);
  out.i32(w.turn);
  out.u32(static_cast<std::uint32_t>(w.tanks.size()));
  for (const auto& t : w.tanks) {
    out.i32(t.id);
    out.u8(static_cast<std::uint8_t>(t.kind));
    out.i32(t.team);
    out.pos(t.pos);
    out.u8(static_cast<std::uint8_t>(t.facing));
    out.i32(t.health);
    out.i32(t.score);
    out.u8(t.coop_capable ? 1 : 0);
  }
  out.u32(static_cast<std::uint32_t>(w.bases.size()));
  for (const auto& b : w.bases) {
    out.i32(b.id);
    out.i32(b.team);
    out.pos(b.pos);
    out.u8(b.destroyed ? 1 : 0);
    out.u8(b.goal_marker ? 1 : 0);
  }
  for (int i = 0; i < kGridCells * kGridCells; i += 8) {
    std::uint8_t byte = 0;
    for (int k = 0; k < 8; ++k)
      if (w.walls.at_index(i + k)) byte |= static_cast<std::uint8_t>(1u << k);
    out.u8(byte);
  }
  out.u32(static_cast<std::uint32_t>(w.coop_log.size()));
  for (const auto& m : w.coop_log) {
    out.i32(m.turn);
    out.i32(m.from_id);
    out.i32(m.to_id);
    out.str(m.body);
    out.u8(static_cast<std::uint8_t>(m.disposition));
  }
  out.u32(static_cast<std::uint32_t>(w.mailboxes.size()));
  for (const auto& [id, box] : w.mailboxes) {
    out.i32(id);
    out.u32(static_cast<std::uint32_t>(box.size()));
    for (int idx : box) out.i32(idx);
  }
  out.u32(static_cast<std::uint32_t>(w.coop_pairs.size()));
  for (const auto& p : w.coop_pairs) {
    out.i32(p.a);
    out.i32(p.b);
    out.i32(p.since_turn);
    out.i32(p.refreshed_turn);
  }
  out.u32(static_cast<std::uint32_t>(w.last_targets.size()));
  for (const auto& [id, target] : w.last_targets) {
    out.i32(id);
    out.i32(target);
  }
  out.u64(w.rng_world.seed());
  out.u64(w.rng_world.draws());
  out.u64(w.rng_npc.seed());
  out.u64(w.rng_npc.draws());
  out.u8(static_cast<std::uint8_t>(w.status.reason));
  out.i32(w.status.winner_team);
  out.u8(w.coop_enabled ? 1 : 0);
  return out.bytes();
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
    v >>= 4;
  }
  return s;
}

inline std::string digest(std::string_view text) { return hex64(fnv1a64(text)); }

inline std::string world_hash(const WorldState& w) { return digest(serialize(w)); }

}  // namespace bab
