#include <gtest/gtest.h>

#include <numeric>

#include "bab/engine.hpp"
#include "support/oracles.hpp"
#include "support/worlds.hpp"

namespace bab {
namespace {

using engine::apply_move;
using engine::apply_shoot;
using engine::check_termination;
using engine::load_stage;
using engine::step_turn;
using testing::act;
using testing::add_agent;
using testing::add_base;
using testing::add_npc;
using testing::add_walls;
using testing::bare_world;

int count_kind(const WorldState& w, TankKind k) {
  int n = 0;
  for (const auto& t : w.tanks) n += t.kind == k;
  return n;
}

TEST(StageTable, DefaultsFollowTheSettingsTable) {
  const int turns[] = {60, 60, 80, 80, 80, 80, 80};
  const int agents[] = {1, 1, 2, 2, 4, 4, 6};
  const int npcs[] = {0, 10, 10, 10, 10, 10, 10};
  for (int s = 1; s <= 7; ++s) {
    const StageConfig c = default_stage(s);
    EXPECT_EQ(c.turn_cap, turns[s - 1]) << "stage " << s;
    EXPECT_EQ(c.n_agents, agents[s - 1]) << "stage " << s;
    EXPECT_EQ(c.n_npcs, npcs[s - 1]) << "stage " << s;
  }
  EXPECT_THROW(default_stage(0), ConfigError);
  EXPECT_THROW(default_stage(8), ConfigError);
}

TEST(LoadStage, StageOneHasOneAgentAndOneBase) {
  const WorldState w = load_stage(1, 7);
  EXPECT_EQ(count_kind(w, TankKind::Agent), 1);
  EXPECT_EQ(count_kind(w, TankKind::Npc), 0);
  EXPECT_EQ(w.bases.size(), 1u);
  EXPECT_EQ(w.config.turn_cap, 60);
  EXPECT_TRUE(w.status.running());
}

TEST(LoadStage, StageFiveHasTwoTeamsOfTwo) {
  const WorldState w = load_stage(5, 7);
  EXPECT_EQ(count_kind(w, TankKind::Agent), 4);
  EXPECT_EQ(count_kind(w, TankKind::Npc), 10);
  EXPECT_EQ(w.bases.size(), 2u);
  EXPECT_EQ(w.config.turn_cap, 80);
  std::map<int, int> per_team;
  for (const auto& t : w.tanks)
    if (t.is_agent()) per_team[t.team]++;
  EXPECT_EQ(per_team, (std::map<int, int>{{0, 2}, {1, 2}}));
}

TEST(LoadStage, SameSeedGivesIdenticalBytes) {
  for (int s = 1; s <= 7; ++s) {
    EXPECT_EQ(serialize(load_stage(s, 7)), serialize(load_stage(s, 7))) << "stage " << s;
  }
  EXPECT_NE(serialize(load_stage(5, 7)), serialize(load_stage(5, 8)));
}

TEST(LoadStage, LayoutsRespectFootprintsAndGrid) {
  for (int s = 1; s <= 7; ++s) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const WorldState w = load_stage(s, seed);
      std::vector<Rect> solids;
      for (const auto& t : w.tanks) {
        EXPECT_TRUE(on_grid(t.pos));
        EXPECT_TRUE(t.footprint().inside_map());
        solids.push_back(t.footprint());
      }
      for (const auto& b : w.bases) {
        EXPECT_TRUE(b.footprint().inside_map());
        solids.push_back(b.footprint());
      }
      for (std::size_t i = 0; i < solids.size(); ++i) {
        EXPECT_FALSE(w.walls.any_in(solids[i])) << "stage " << s << " seed " << seed;
        for (std::size_t j = i + 1; j < solids.size(); ++j) EXPECT_FALSE(solids[i].intersects(solids[j]));
      }
    }
  }
}

TEST(LoadStage, CollidingOverridesNameBothEntities) {
  StageOverrides o;
  o.agent_positions = std::vector<Position>{{64, 64}, {64, 64}};
  try {
    load_stage(4, 1, o);
    FAIL() << "expected a load error";
  } catch (const LoadError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("agent 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("agent 1"), std::string::npos) << msg;
  }
}

TEST(LoadStage, InvalidStageIdThrows) {
  EXPECT_THROW(load_stage(9, 1), ConfigError);
}

TEST(ApplyMove, StepsOneTankLength) {
  WorldState w = bare_world(4);
  add_agent(w, 1, 0, {128, 128}, Orientation::Up);
  const MoveOutcome m = apply_move(w, 1, Orientation::Right);
  EXPECT_TRUE(m.moved);
  EXPECT_EQ(w.find_tank(1)->pos, (Position{160, 128}));
  EXPECT_EQ(w.find_tank(1)->facing, Orientation::Right);
}

TEST(ApplyMove, MapEdgeBlocks) {
  WorldState w = bare_world(4);
  add_agent(w, 1, 0, {0, 128}, Orientation::Up);
  const MoveOutcome m = apply_move(w, 1, Orientation::Left);
  EXPECT_FALSE(m.moved);
  EXPECT_EQ(m.blocker, Blocker::Boundary);
  EXPECT_EQ(w.find_tank(1)->pos, (Position{0, 128}));
  EXPECT_EQ(w.find_tank(1)->facing, Orientation::Left);
}

TEST(ApplyMove, SingleWallCellBlocks) {
  WorldState w = bare_world(4);
  add_agent(w, 1, 0, {128, 128}, Orientation::Up);
  add_walls(w, 160, 128, 8, 8);
  const MoveOutcome m = apply_move(w, 1, Orientation::Right);
  EXPECT_FALSE(m.moved);
  EXPECT_EQ(m.blocker, Blocker::Wall);
  EXPECT_EQ(w.find_tank(1)->pos, (Position{128, 128}));
  EXPECT_EQ(w.find_tank(1)->facing, Orientation::Right);
}

TEST(ApplyMove, TanksAndSolidBasesBlockButGoalMarkersDoNot) {
  WorldState w = bare_world(4);
  add_agent(w, 1, 0, {128, 128});
  add_npc(w, 2, {128, 96});
  add_base(w, 3, 1, {160, 128});
  EXPECT_EQ(apply_move(w, 1, Orientation::Up).blocker, Blocker::Tank);
  EXPECT_EQ(apply_move(w, 1, Orientation::Right).blocker, Blocker::Base);

  WorldState nav = bare_world(1);
  add_agent(nav, 1, 0, {128, 128});
  add_base(nav, 2, 0, {160, 128}, true);
  EXPECT_TRUE(apply_move(nav, 1, Orientation::Right).moved);
}

TEST(ApplyMove, DeadOrUnknownEntityThrows) {
  WorldState w = bare_world(4);
  add_agent(w, 1, 0, {128, 128}).health = 0;
  EXPECT_THROW(apply_move(w, 1, Orientation::Up), EngineError);
  EXPECT_THROW(apply_move(w, 42, Orientation::Up), EngineError);
}

TEST(ApplyShoot, NpcThreeCellsAheadIsDestroyed) {
  WorldState w = bare_world(4);
  add_agent(w, 1, 0, {128, 224}, Orientation::Up);
  add_npc(w, 2, {128, 168});
  const ShootOutcome s = apply_shoot(w, 1);
  EXPECT_EQ(s.kind, ShotKind::HitTank);
  EXPECT_EQ(s.target_id, 2);
  EXPECT_TRUE(s.destroyed);
  EXPECT_EQ(s.score_delta, 1);
  EXPECT_EQ(w.find_tank(1)->score, 1);
  EXPECT_FALSE(w.find_tank(2)->alive());
}

TEST(ApplyShoot, EnemyBaseScoresFive) {
  WorldState w = bare_world(4);
  add_agent(w, 1, 0, {128, 384}, Orientation::Right);
  add_agent(w, 2, 1, {32, 32});
  add_base(w, 3, 0, {32, 448});
  add_base(w, 4, 1, {448, 384});
  const ShootOutcome s = apply_shoot(w, 1);
  EXPECT_EQ(s.kind, ShotKind::HitBase);
  EXPECT_EQ(s.target_id, 4);
  EXPECT_EQ(s.score_delta, 5);
  EXPECT_TRUE(w.find_base(4)->destroyed);
  EXPECT_FALSE(w.find_tank(2)->alive()) << "the base's team is eliminated";
}

TEST(ApplyShoot, ClearLineHitsNothing) {
  WorldState w = bare_world(4);
  add_agent(w, 1, 0, {128, 128}, Orientation::Left);
  const std::string before = serialize(w);
  const ShootOutcome s = apply_shoot(w, 1);
  EXPECT_EQ(s.kind, ShotKind::NoHit);
  EXPECT_EQ(serialize(w), before);
}

TEST(ApplyShoot, WallHitRemovesTheLaneCells) {
  WorldState w = bare_world(4);
  add_agent(w, 1, 0, {128, 128}, Orientation::Right);
  add_walls(w, 200, 128, 8, 32);
  const ShootOutcome s = apply_shoot(w, 1);
  EXPECT_EQ(s.kind, ShotKind::HitWall);
  EXPECT_EQ(s.cells, (std::vector<int>{WallGrid::index(25, 17), WallGrid::index(25, 18)}));
  EXPECT_EQ(w.walls.count(), 2) << "cells outside the 16-px lane survive";
}

TEST(ApplyShoot, FriendlyFireDamagesWithoutScore) {
  WorldState w = bare_world(5);
  add_agent(w, 1, 0, {128, 128}, Orientation::Down);
  add_agent(w, 2, 0, {128, 256});
  const ShootOutcome s = apply_shoot(w, 1);
  EXPECT_EQ(s.kind, ShotKind::HitTank);
  EXPECT_FALSE(s.enemy);
  EXPECT_EQ(s.score_delta, 0);
  EXPECT_EQ(w.find_tank(2)->health, kAgentHealth - 1);
}

TEST(NpcPolicy, SeedZeroGolden) {
  WorldState w = load_stage(2, 0);
  const int npc = w.tanks.back().id;
  std::vector<Action> got;
  for (int i = 0; i < 5; ++i) got.push_back(engine::npc_policy(w, npc));
  const std::vector<Action> golden = {Action::MoveDown, Action::MoveLeft, Action::MoveRight, Action::Shoot,
                                      Action::MoveUp};
  EXPECT_EQ(got, golden);
}

TEST(NpcPolicy, DrawsAreUniform) {
  WorldState w = load_stage(2, 11);
  const int npc = w.tanks.back().id;
  std::map<Action, int> counts;
  for (int i = 0; i < 10000; ++i) counts[engine::npc_policy(w, npc)]++;
  for (Action a : kAllActions) {
    const double f = counts[a] / 10000.0;
    EXPECT_GE(f, 0.18) << action_name(a);
    EXPECT_LE(f, 0.22) << action_name(a);
  }
}

TEST(NpcPolicy, RejectsAgents) {
  WorldState w = load_stage(2, 0);
  EXPECT_THROW(engine::npc_policy(w, 1), EngineError);
}

TEST(StepTurn, LowerIdWinsContestedCell) {
  WorldState w = bare_world(4);
  add_agent(w, 1, 0, {128, 128});
  add_agent(w, 2, 1, {192, 128});
  add_base(w, 3, 0, {0, 480});
  add_base(w, 4, 1, {480, 0});
  const auto recs = step_turn(w, {{1, act(Action::MoveRight)}, {2, act(Action::MoveLeft)}});
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].resolution.kind, ResolutionKind::Moved);
  EXPECT_EQ(recs[1].resolution.kind, ResolutionKind::Blocked);
  EXPECT_EQ(recs[1].resolution.blocker, Blocker::Tank);
  EXPECT_EQ(recs[0].pos_after, (Position{160, 128}));
}

TEST(StepTurn, MalformedReplyIsNoOp) {
  WorldState w = bare_world(1);
  add_agent(w, 1, 0, {128, 128});
  add_base(w, 2, 0, {448, 32}, true);
  ParsedAction bad;
  bad.raw = "I think we should flank.";
  const auto recs = step_turn(w, {{1, bad}});
  EXPECT_FALSE(recs[0].parsed.format_ok);
  EXPECT_EQ(recs[0].resolution.kind, ResolutionKind::NoOp);
  EXPECT_EQ(recs[0].pos_after, recs[0].pos_before);
  EXPECT_EQ(w.turn, 1);
}

TEST(StepTurn, SameInputsGiveSameRecords) {
  auto run = [] {
    WorldState w = load_stage(7, 3);
    std::vector<std::string> hashes;
    for (int t = 0; t < 10 && w.status.running(); ++t) {
      std::map<int, ParsedAction> acts;
      for (int id : w.live_agent_ids()) acts[id] = act(kAllActions[(id + t) % 5], 1);
      for (const auto& r : step_turn(w, acts)) hashes.push_back(r.world_hash + resolution_name(r.resolution.kind).data());
    }
    return hashes;
  };
  EXPECT_EQ(run(), run());
}

TEST(StepTurn, MissingOrExtraActionsThrow) {
  WorldState w = bare_world(4);
  add_agent(w, 1, 0, {128, 128});
  add_agent(w, 2, 1, {256, 128});
  EXPECT_THROW(step_turn(w, {{1, act(Action::Shoot)}}), EngineError);
  EXPECT_THROW(step_turn(w, {{1, act(Action::Shoot)}, {2, act(Action::Shoot)}, {3, act(Action::Shoot)}}),
               EngineError);
}

TEST(Termination, CentreOnGoalEndsNavigation) {
  WorldState w = bare_world(1);
  add_agent(w, 1, 0, {256, 256});
  add_base(w, 2, 0, {256, 256}, true);
  EXPECT_EQ(check_termination(w).reason, EndReason::GoalReached);
}

TEST(Termination, DrivingOntoTheGoalEndsTheEpisode) {
  WorldState w = bare_world(1);
  add_agent(w, 1, 0, {256, 288});
  add_base(w, 2, 0, {256, 256}, true);
  EXPECT_TRUE(check_termination(w).running()) << "centres exactly 32 px apart";
  step_turn(w, {{1, act(Action::MoveUp)}});
  EXPECT_EQ(w.status.reason, EndReason::GoalReached);
  EXPECT_THROW(step_turn(w, {{1, act(Action::MoveUp)}}), EngineError);
}

TEST(Termination, EnemyBaseDestroyedIsVictory) {
  WorldState w = bare_world(4);
  add_agent(w, 1, 0, {128, 384}, Orientation::Right);
  add_agent(w, 2, 1, {32, 32});
  add_base(w, 3, 0, {32, 448});
  add_base(w, 4, 1, {448, 384});
  const auto recs = step_turn(w, {{1, act(Action::Shoot, 4)}, {2, act(Action::MoveDown, 3)}});
  EXPECT_EQ(recs[0].score_delta, 5);
  EXPECT_EQ(w.status.reason, EndReason::TeamVictory);
  EXPECT_EQ(w.status.winner_team, 0);
}

TEST(Termination, TurnCap) {
  WorldState w = bare_world(4);
  add_agent(w, 1, 0, {128, 128});
  add_agent(w, 2, 1, {256, 128});
  add_base(w, 3, 0, {0, 480});
  add_base(w, 4, 1, {480, 0});
  w.turn = w.config.turn_cap - 1;
  step_turn(w, {{1, ParsedAction::noop()}, {2, ParsedAction::noop()}});
  EXPECT_EQ(w.turn, w.config.turn_cap);
  EXPECT_EQ(w.status.reason, EndReason::TurnCapReached);
}

// Random fuzzing over real stages: every property below must hold after each turn.
class FuzzedEpisodes : public ::testing::TestWithParam<int> {};

TEST_P(FuzzedEpisodes, InvariantsHold) {
  const int stage = GetParam();
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    WorldState w = load_stage(stage, seed);
    RandomStream pick(mix_seed(seed, 77));
    int walls = w.walls.count();
    auto health = [&] {
      return std::accumulate(w.tanks.begin(), w.tanks.end(), 0, [](int s, const Tank& t) { return s + t.health; });
    };
    int hp = health();
    while (w.status.running()) {
      const int turn = w.turn;
      std::map<int, ParsedAction> acts;
      for (int id : w.live_agent_ids()) {
        acts[id] = act(kAllActions[pick.below(5)]);
        if (pick.below(10) == 0) acts[id] = ParsedAction::noop();
      }
      std::map<int, Orientation> want;
      for (const auto& [id, a] : acts)
        if (a.format_ok && is_move(*a.action)) want[id] = move_direction(*a.action);

      const auto recs = step_turn(w, acts);
      ASSERT_EQ(w.turn, turn + 1);

      int expected_delta = 0, delta = 0;
      for (const auto& r : recs) {
        delta += r.score_delta;
        if (r.resolution.enemy && r.resolution.kind == ResolutionKind::HitTank) expected_delta += 1;
        if (r.resolution.enemy && r.resolution.kind == ResolutionKind::HitBase) expected_delta += 5;
        if (r.resolution.kind == ResolutionKind::Blocked) {
          EXPECT_EQ(r.pos_after, r.pos_before);
        }
        if (want.count(r.agent_id) && r.resolution.kind != ResolutionKind::Dead &&
            w.find_tank(r.agent_id)->alive()) {
          // Facing is observable only while the tank is alive and nobody moved it afterwards.
          EXPECT_EQ(w.find_tank(r.agent_id)->facing, want[r.agent_id]);
        }
      }
      EXPECT_EQ(delta, expected_delta);

      EXPECT_LE(w.walls.count(), walls);
      walls = w.walls.count();
      EXPECT_LE(health(), hp);
      hp = health();

      std::vector<Rect> solids;
      for (const auto& t : w.tanks)
        if (t.alive()) solids.push_back(t.footprint());
      for (const auto& b : w.bases)
        if (b.solid()) solids.push_back(b.footprint());
      for (std::size_t i = 0; i < solids.size(); ++i) {
        ASSERT_TRUE(solids[i].inside_map());
        ASSERT_FALSE(w.walls.any_in(solids[i])) << "stage " << stage << " seed " << seed;
        for (std::size_t j = i + 1; j < solids.size(); ++j) ASSERT_FALSE(solids[i].intersects(solids[j]));
      }
    }
    EXPECT_LE(w.turn, w.config.turn_cap);
  }
}

INSTANTIATE_TEST_SUITE_P(AllStages, FuzzedEpisodes, ::testing::Range(1, 8));

TEST(BlockedMoves, AlwaysRotate) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    WorldState w = load_stage(6, seed);
    RandomStream pick(seed);
    for (int i = 0; i < 200; ++i) {
      const int id = w.live_agent_ids()[static_cast<std::size_t>(pick.below(4))];
      const Orientation dir = kAllOrientations[pick.below(4)];
      const Position before = w.find_tank(id)->pos;
      const MoveOutcome m = apply_move(w, id, dir);
      EXPECT_EQ(w.find_tank(id)->facing, dir);
      if (!m.moved) {
        EXPECT_EQ(w.find_tank(id)->pos, before);
      }
    }
  }
}

// Random 64x64 configurations: the engine's hit must equal the brute-force scan.
TEST(RayOracle, MatchesBruteForceScan) {
  RandomStream rng(mix_seed(2024, 9));
  int checked = 0, kinds[4] = {};
  for (int trial = 0; trial < 1000; ++trial) {
    WorldState w = testing::random_shot_world(rng);
    const oracle::Shot expect = oracle::shoot(w, 1);
    const ShootOutcome got = apply_shoot(w, 1);
    ASSERT_EQ(got.kind, expect.kind) << "trial " << trial;
    EXPECT_EQ(got.cells, expect.cells) << "trial " << trial;
    if (got.kind == ShotKind::HitTank || got.kind == ShotKind::HitBase) {
      EXPECT_EQ(got.target_id, expect.target_id) << "trial " << trial;
    }
    EXPECT_EQ(got.score_delta, expect.score) << "trial " << trial;
    kinds[static_cast<int>(got.kind)]++;
    ++checked;
  }
  EXPECT_EQ(checked, 1000);
  for (int k = 0; k < 4; ++k) EXPECT_GT(kinds[k], 0) << "shot kind " << k << " never exercised";
}

TEST(Serialization, HashIsStableAndSensitive) {
  WorldState a = load_stage(3, 5);
  WorldState b = load_stage(3, 5);
  EXPECT_EQ(world_hash(a), world_hash(b));
  EXPECT_EQ(world_hash(a).size(), 16u);
  b.find_tank(1)->facing = b.find_tank(1)->facing == Orientation::Up ? Orientation::Down : Orientation::Up;
  EXPECT_NE(world_hash(a), world_hash(b));
  EXPECT_EQ(digest(""), "cbf29ce484222325");
}

}  // namespace
}  // namespace bab
