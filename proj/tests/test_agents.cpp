#include <gtest/gtest.h>


#include "bab/agents.hpp"
#include "bab/engine.hpp"
#include "support/files.hpp"
#include "support/stub_server.hpp"
#include "support/worlds.hpp"

namespace bab {
namespace {

using namespace agents;
using testing::add_agent;
using testing::add_base;
using testing::add_walls;
using testing::bare_world;
using testing::completion;
using testing::StubServer;
using testing::TempDir;

Reply ask(Agent& a, const WorldState& w, int id, Locale l = Locale::En) {
  return a.decide(Query{w, id, protocol::render_observation(w, id, l), l});
}

// Plays a few turns with every agent on the given backend, checking each reply parses.
void expect_always_formatted(const BackendSpec& backend) {
  for (int stage = 1; stage <= 7; ++stage) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      for (Locale l : {Locale::En, Locale::Zh}) {
        WorldState w = engine::load_stage(stage, seed);
        std::map<int, std::unique_ptr<Agent>> slots;
        for (int id : w.agent_ids()) slots[id] = make_agent({id, Role::Primary, backend}, seed);
        for (int turn = 0; turn < 15 && w.status.running(); ++turn) {
          std::map<int, ParsedAction> acts;
          for (int id : w.live_agent_ids()) {
            const Reply r = ask(*slots[id], w, id, l);
            acts[id] = protocol::parse_response(stage, r.text);
            ASSERT_TRUE(acts[id].format_ok) << "stage " << stage << ": " << r.text;
            if (protocol::reply_format(stage) == protocol::ReplyFormat::AttackCooperation) {
              ASSERT_TRUE(acts[id].coop) << r.text;
            }
          }
          protocol::route_coop(w, acts, true);
          engine::step_turn(w, acts);
        }
      }
    }
  }
}

TEST(LocalBackends, RandomRepliesAlwaysParse) { expect_always_formatted(RandomSpec{}); }

TEST(LocalBackends, GreedyRepliesAlwaysParse) { expect_always_formatted(GreedySpec{}); }

TEST(RandomAgent, StageOneReplyShape) {
  const WorldState w = engine::load_stage(1, 3);
  RandomAgent a(42);
  std::map<Action, int> seen;
  for (int i = 0; i < 500; ++i) {
    const std::string text = ask(a, w, 1).text;
    const ParsedAction p = protocol::parse_response(1, text);
    EXPECT_EQ(text, "#Operation: " + std::string(action_token(*p.action)));
    seen[*p.action]++;
  }
  EXPECT_EQ(seen.size(), 5u);
  for (const auto& [_, n] : seen) EXPECT_GT(n, 70);
}

TEST(RandomAgent, FixedSeedIsReproducible) {
  const WorldState w = engine::load_stage(7, 5);
  auto a = make_agent({2, Role::Secondary, RandomSpec{}}, 99);
  auto b = make_agent({2, Role::Secondary, RandomSpec{}}, 99);
  auto c = make_agent({3, Role::Secondary, RandomSpec{}}, 99);
  std::vector<std::string> ra, rb, rc;
  for (int i = 0; i < 40; ++i) {
    ra.push_back(ask(*a, w, 2).text);
    rb.push_back(ask(*b, w, 2).text);
    rc.push_back(ask(*c, w, 2).text);
  }
  EXPECT_EQ(ra, rb);
  EXPECT_NE(ra, rc) << "each slot draws from its own stream";
}

TEST(GreedyOracle, TieGoesHorizontal) {
  WorldState w = bare_world(1);
  add_agent(w, 1, 0, {64, 448});
  add_base(w, 2, 0, {448, 64}, true);
  EXPECT_EQ(greedy_decide(w, 1).action, Action::MoveRight);
  GreedyAgent g;
  EXPECT_EQ(ask(g, w, 1).text, "#Operation: #Move_right#");
}

TEST(GreedyOracle, BaseStrictlyAboveMovesUp) {
  WorldState w = bare_world(1);
  add_agent(w, 1, 0, {256, 256});
  add_base(w, 2, 0, {256, 64}, true);
  GreedyAgent g;
  EXPECT_EQ(ask(g, w, 1).text, "#Operation: #Move_up#");
}

TEST(GreedyOracle, WallAheadIsShot) {
  WorldState w = bare_world(1);
  add_agent(w, 1, 0, {256, 256}, Orientation::Up);
  add_base(w, 2, 0, {256, 64}, true);
  add_walls(w, 256, 224, 32, 8);
  EXPECT_EQ(greedy_decide(w, 1).action, Action::Shoot);

  w.find_tank(1)->facing = Orientation::Left;
  EXPECT_EQ(greedy_decide(w, 1).action, Action::MoveUp) << "turns to face the wall first";
}

TEST(GreedyOracle, BattleStagesCarryTargetAndCoopLines) {
  const WorldState w = engine::load_stage(5, 1);
  GreedyAgent g;
  const std::string text = ask(g, w, 1).text;
  EXPECT_NE(text.find("#Attack operation: Target "), std::string::npos);
  EXPECT_NE(text.find("\n#Cooperation operation: #No_coop#"), std::string::npos);
  const ParsedAction p = protocol::parse_response(5, text);
  EXPECT_EQ(p.target_id, engine::nearest_enemy_base(w, *w.find_tank(1))->id);
}

TEST(GreedyOracle, ReachesTheGoalInTheManhattanBound) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    StageOverrides o;
    o.wall_permille = 0;
    WorldState w = engine::load_stage(1, seed, o);
    const Position start = w.tanks.front().pos;
    const Position goal = w.bases.front().pos;
    const int bound = (std::abs(goal.x - start.x) + 31) / 32 + (std::abs(goal.y - start.y) + 31) / 32;
    while (w.status.running()) engine::step_turn(w, {{1, greedy_decide(w, 1)}});
    EXPECT_EQ(w.status.reason, EndReason::GoalReached);
    EXPECT_EQ(w.turn, bound) << "seed " << seed;
  }
}

TEST(CannedAgent, SubstitutesIdAndUnescapes) {
  TempDir dir("agents");
  dir.file("agent1.txt", "#Operation: #Shoot#\nthinking\\n#Operation: #Move_up#\n");
  dir.file("agent2.txt", "#Operation: #Move_left#\n");
  const WorldState w = engine::load_stage(1, 1);
  auto one = make_agent({1, Role::Primary, CannedSpec{dir.path() + "/agent{id}.txt"}}, 0);
  auto two = make_agent({2, Role::Primary, CannedSpec{dir.path() + "/agent{id}.txt"}}, 0);
  EXPECT_EQ(ask(*one, w, 1).text, "#Operation: #Shoot#");
  EXPECT_EQ(ask(*one, w, 1).text, "thinking\n#Operation: #Move_up#");
  EXPECT_THROW(ask(*one, w, 1), AgentError);
  EXPECT_EQ(ask(*two, w, 1).text, "#Operation: #Move_left#");
  EXPECT_THROW(make_agent({3, Role::Primary, CannedSpec{dir.path() + "/agent{id}.txt"}}, 0), AgentError);
}

TEST(Backends, ModelNamesMapToBackends) {
  EXPECT_TRUE(std::holds_alternative<RandomSpec>(backend_from_model("random")));
  EXPECT_TRUE(std::holds_alternative<GreedySpec>(backend_from_model("greedy")));
  EXPECT_EQ(std::get<CannedSpec>(backend_from_model("canned:x/{id}.txt")).path, "x/{id}.txt");
  const auto remote = std::get<RemoteSpec>(backend_from_model("some-model", "http://h:1/v1"));
  EXPECT_EQ(remote.base_url, "http://h:1/v1");
  EXPECT_DOUBLE_EQ(remote.temperature, 0.2);
  EXPECT_EQ(remote.max_tokens, 512);
  EXPECT_EQ(remote.max_retries, 3);
  EXPECT_EQ(remote.timeout_seconds, 60);
  EXPECT_THROW(backend_from_model(""), std::invalid_argument);
}

TEST(SplitPrompt, GameStateIsTheUserMessage) {
  const std::string prompt = protocol::render_observation(engine::load_stage(3, 1), 1, Locale::En);
  const ChatExchange ex = split_prompt(prompt);
  EXPECT_EQ(ex.user.rfind("<game>", 0), 0u);
  EXPECT_EQ(ex.user.substr(ex.user.size() - 7), "</game>");
  EXPECT_EQ(ex.system.rfind("You are", 0), 0u);
}

RemoteSpec remote_spec(const std::string& url) {
  RemoteSpec s;
  s.model = "stub-model";
  s.base_url = url;
  s.api_key = "test-key";
  s.timeout_seconds = 5;
  return s;
}

TEST(RemoteAgent, RetriesMalformedBodiesWithBackoff) {
  StubServer stub({{200, "not json"}, {200, R"({"choices": []})"}, {200, completion("#Operation: #Move_up#")}});
  std::vector<long long> waits;
  RemoteAgent agent(remote_spec(stub.url()), [&](std::chrono::milliseconds d) { waits.push_back(d.count()); });
  const WorldState w = engine::load_stage(1, 1);
  const std::string before = serialize(w);
  const Reply r = ask(agent, w, 1);
  EXPECT_EQ(r.text, "#Operation: #Move_up#");
  EXPECT_EQ(r.attempts, 3);
  EXPECT_TRUE(r.error.empty());
  EXPECT_EQ(waits, (std::vector<long long>{1000, 2000}));
  EXPECT_EQ(serialize(w), before);
}

TEST(RemoteAgent, RequestCarriesModelMessagesAndDecoding) {
  StubServer stub({{200, completion("#Operation: #Shoot#")}});
  RemoteAgent agent(remote_spec(stub.url()), [](std::chrono::milliseconds) {});
  const WorldState w = engine::load_stage(1, 1);
  const std::string prompt = protocol::render_observation(w, 1, Locale::En);
  agent.decide(Query{w, 1, prompt, Locale::En});
  ASSERT_EQ(stub.bodies().size(), 1u);
  const auto body = nlohmann::json::parse(stub.bodies()[0]);
  EXPECT_EQ(body["model"], "stub-model");
  EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.2);
  EXPECT_EQ(body["max_tokens"], 512);
  ASSERT_EQ(body["messages"].size(), 2u);
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][1]["role"], "user");
  EXPECT_EQ(body["messages"][1]["content"].get<std::string>() + "\n\n" + body["messages"][0]["content"].get<std::string>(),
            prompt);
  EXPECT_EQ(stub.auth(), "Bearer test-key");
}

TEST(RemoteAgent, ExhaustedBudgetReturnsAnError) {
  StubServer stub({{500, "overloaded"}});
  RemoteSpec spec = remote_spec(stub.url());
  spec.max_retries = 2;
  RemoteAgent agent(spec, [](std::chrono::milliseconds) {});
  const Reply r = ask(agent, engine::load_stage(1, 1), 1);
  EXPECT_EQ(r.attempts, 3);
  EXPECT_EQ(stub.calls(), 3u);
  EXPECT_TRUE(r.text.empty());
  EXPECT_EQ(r.error, "http status 500");
  EXPECT_FALSE(protocol::parse_response(1, r.text).format_ok);
}

TEST(RemoteAgent, UnreachableEndpointIsATransportError) {
  RemoteSpec spec = remote_spec("http://127.0.0.1:1/v1");
  spec.max_retries = 1;
  spec.timeout_seconds = 1;
  RemoteAgent agent(spec, [](std::chrono::milliseconds) {});
  const Reply r = ask(agent, engine::load_stage(1, 1), 1);
  EXPECT_EQ(r.attempts, 2);
  EXPECT_EQ(r.error.rfind("transport error", 0), 0u) << r.error;
  EXPECT_THROW(RemoteAgent(RemoteSpec{}), AgentError);
}

}  // namespace
}  // namespace bab
