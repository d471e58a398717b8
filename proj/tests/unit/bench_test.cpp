#include "doctest.h"

#include <json.hpp>

#include "conav/bench.hpp"

using namespace conav;

namespace {

EpisodeConfig small_config(PolicyKind policy, std::uint64_t seed) {
  EpisodeConfig c;
  c.policy = policy;
  c.seed = seed;
  c.mcts.iterations = 40;
  c.step_budget = 120;
  return c;
}

struct Recorded {
  EpisodeMetrics metrics;
  std::vector<HumanInput> inputs;
};

Recorded run_recorded(const EpisodeConfig& c, const PerceptionModel* model) {
  Episode ep(c, model);
  SyntheticOperator op(c);
  while (ep.phase() != Episode::Phase::Finished) {
    op.respond(ep);
    if (ep.phase() == Episode::Phase::RobotTurn) ep.robot_turn();
  }
  return {ep.metrics(), ep.human_inputs()};
}

bool same_turns(const EpisodeMetrics& a, const EpisodeMetrics& b) {
  if (a.turns.size() != b.turns.size()) return false;
  for (std::size_t i = 0; i < a.turns.size(); ++i) {
    const TurnRecord& x = a.turns[i];
    const TurnRecord& y = b.turns[i];
    if (x.turn != y.turn || x.step != y.step || x.kind != y.kind || x.detail != y.detail || x.cell != y.cell) {
      return false;
    }
  }
  return true;
}

const SynthPerception kModel{SynthHumanConfig{}};

}  // namespace

TEST_CASE("policy names round-trip") {
  for (const PolicyKind p : {PolicyKind::IgMcts, PolicyKind::InstructionFollowing, PolicyKind::TeleopStream}) {
    CHECK(policy_from_string(to_string(p)) == p);
  }
  CHECK(world_from_string("continuous") == WorldKind::Continuous);
  CHECK(human_from_string("live") == HumanKind::Live);
  CHECK_THROWS_AS(policy_from_string("autopilot"), Error);
}

TEST_CASE("config validation") {
  EpisodeConfig c;
  CHECK_NOTHROW(c.validate());
  c.step_budget = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.maze_size = 12;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.policy = PolicyKind::IgMcts;
  CHECK_THROWS_AS(Episode(c, nullptr), Error);
}

TEST_CASE("all goals at the start finish immediately") {
  EpisodeConfig c = small_config(PolicyKind::IgMcts, 4);
  GridMaze maze = generate_maze(4, 13);
  maze.goals = {maze.start};
  Episode ep(c, &kModel, maze);
  CHECK(ep.phase() == Episode::Phase::Finished);
  CHECK(ep.metrics().steps == 0);
  CHECK(ep.metrics().images == 0);
  CHECK(ep.metrics().complete);
  CHECK(ep.metrics().communication_mb == 0.0);
}

TEST_CASE("accounting identity") {
  for (const PolicyKind p : {PolicyKind::IgMcts, PolicyKind::InstructionFollowing, PolicyKind::TeleopStream}) {
    for (const std::uint64_t seed : {1u, 2u}) {
      const EpisodeConfig c = small_config(p, seed);
      const EpisodeMetrics m = run_episode(c, &kModel);
      CAPTURE(to_string(p));
      CAPTURE(seed);
      const int units = p == PolicyKind::IgMcts ? m.images : m.steps;
      CHECK(m.communication_mb == 0.18 * units);
      CHECK(m.steps <= c.step_budget);
      CHECK(m.goals_claimed <= m.goals_total);
      CHECK(m.complete == (m.goals_claimed == m.goals_total));
      CHECK(m.mapping_accuracy > 0.0);
      CHECK(m.mapping_accuracy <= 1.0);
      if (p == PolicyKind::IgMcts) {
        // one image per communicate turn, each answered by one guidance
        int comms = 0;
        for (const TurnRecord& t : m.turns) comms += t.kind == "communicate";
        CHECK(comms == m.images);
        CHECK(m.guidance_instances == m.images + 1 - (m.turns.back().kind == "communicate" ? 1 : 0));
      } else {
        CHECK(m.images == 0);
      }
    }
  }
}

TEST_CASE("instruction following stays on guidance and pauses when blocked") {
  for (const std::uint64_t seed : {1u, 2u, 3u, 10u}) {
    const EpisodeConfig c = small_config(PolicyKind::InstructionFollowing, seed);
    Episode ep(c, nullptr);
    SyntheticOperator op(c);
    int blocked = 0;
    while (ep.phase() != Episode::Phase::Finished) {
      op.respond(ep);
      if (ep.phase() != Episode::Phase::RobotTurn) continue;
      const Guidance zeta = ep.guidance();
      const Cell before = ep.pose().cell;
      const int steps = ep.metrics().steps;
      ep.robot_turn();
      if (ep.metrics().steps > steps) {
        CHECK(zeta.contains(ep.pose().cell));
        CHECK(zeta.contains(before));
      }
      if (ep.metrics().turns.back().kind == "blocked") {
        ++blocked;
        CHECK(ep.metrics().steps == steps);
        CHECK(ep.phase() != Episode::Phase::RobotTurn);
        // no movement is possible until new guidance arrives
        CHECK_THROWS_AS(ep.robot_turn(), Error);
      }
    }
    CHECK(ep.metrics().complete);
    CAPTURE(blocked);
  }
}

TEST_CASE("guidance validation") {
  const EpisodeConfig c = small_config(PolicyKind::InstructionFollowing, 5);
  Episode ep(c, nullptr);
  REQUIRE(ep.phase() == Episode::Phase::AwaitingGuidance);
  const Cell s = ep.pose().cell;
  const std::size_t inputs = ep.human_inputs().size();
  CHECK_THROWS_AS(ep.submit_guidance({{s, {s.row + 1, s.col + 1}}, 0}), Error);
  CHECK_THROWS_AS(ep.submit_guidance({{{s.row, s.col + 1}}, 0}), Error);
  CHECK_THROWS_AS(ep.submit_guidance({{s, {s.row, s.col + 1}, {-1, s.col + 1}}, 0}), Error);
  CHECK(ep.phase() == Episode::Phase::AwaitingGuidance);
  CHECK(ep.human_inputs().size() == inputs);
  CHECK(ep.metrics().guidance_instances == 0);
  CHECK_THROWS_AS(ep.robot_turn(), Error);
  ep.submit_guidance({{s}, 0});
  CHECK(ep.phase() == Episode::Phase::RobotTurn);
  CHECK_THROWS_AS(ep.submit_guidance({{s}, 0}), Error);
}

TEST_CASE("operator guidance") {
  const GridMaze maze = maze_from_text(
      "#######\n"
      "#S....#\n"
      "#####.#\n"
      "#G....#\n"
      "#######\n");
  BeliefMap belief = BeliefMap::from_maze(maze);
  SUBCASE("believed free path") {
    const Guidance g = operator_guidance(belief, maze.start, maze.goals);
    CHECK(g.cells.size() == 11);
    CHECK(g.cells.front() == maze.start);
    CHECK(g.cells.back() == maze.goals.front());
  }
  SUBCASE("disconnected belief crosses the cheapest wall") {
    belief.labels[{2, 5}] = CellLabel::Wall;
    const Guidance g = operator_guidance(belief, maze.start, maze.goals);
    REQUIRE_FALSE(g.empty());
    CHECK(is_connected_path(g.cells));
    CHECK(g.cells.front() == maze.start);
    CHECK(g.cells.back() == maze.goals.front());
    // through (2,1): one believed wall and 3 cells beats (2,5): one wall and 11 cells
    CHECK(g.cells.size() == 3);
    Grid<std::uint8_t> seen(maze.height(), maze.width(), 0);
    seen[{2, 1}] = 1;
    const Guidance around = operator_guidance(belief, maze.start, maze.goals, &seen);
    CHECK(around.cells == std::vector<Cell>{{1, 1}, {1, 2}, {2, 2}, {3, 2}, {3, 1}});
  }
  SUBCASE("no goals") { CHECK(operator_guidance(belief, maze.start, {}).empty()); }
}

TEST_CASE("episodes are deterministic and replayable") {
  for (const PolicyKind p : {PolicyKind::IgMcts, PolicyKind::InstructionFollowing, PolicyKind::TeleopStream}) {
    CAPTURE(to_string(p));
    const EpisodeConfig c = small_config(p, 7);
    const Recorded a = run_recorded(c, &kModel);
    const Recorded b = run_recorded(c, &kModel);
    CHECK(same_turns(a.metrics, b.metrics));
    CHECK(a.metrics.communication_mb == b.metrics.communication_mb);
    const EpisodeMetrics r = replay_episode(c, a.inputs, &kModel);
    CHECK(same_turns(a.metrics, r));
    CHECK(r.steps == a.metrics.steps);
    CHECK(r.images == a.metrics.images);
    CHECK(r.mapping_accuracy == a.metrics.mapping_accuracy);
  }
}

TEST_CASE("replay with missing guidance fails") {
  const EpisodeConfig c = small_config(PolicyKind::InstructionFollowing, 7);
  CHECK_THROWS_AS(replay_episode(c, {}), Error);
}

TEST_CASE("suite aggregation") {
  const EpisodeConfig c = small_config(PolicyKind::InstructionFollowing, 0);
  SUBCASE("one seed equals the episode") {
    const SuiteReport r = run_suite(c, {3});
    EpisodeConfig one = c;
    one.seed = 3;
    const EpisodeMetrics m = run_episode(one);
    CHECK(r.steps.mean == m.steps);
    CHECK(r.steps.stddev == 0.0);
    CHECK(r.communication_mb.mean == m.communication_mb);
    CHECK(r.completed == (m.complete ? 1 : 0));
  }
  SUBCASE("identical episodes have zero spread") {
    const SuiteReport r = run_suite(c, {4, 4, 4});
    CHECK(r.steps.stddev == 0.0);
    CHECK(r.mapping_accuracy.stddev == 0.0);
  }
  SUBCASE("rows keep seed order and the report is stable") {
    const SuiteReport a = run_suite(c, {5, 1, 3});
    const SuiteReport b = run_suite(c, {5, 1, 3});
    REQUIRE(a.rows.size() == 3);
    CHECK(a.rows[0].seed == 5);
    CHECK(a.rows[1].seed == 1);
    CHECK(a.rows[2].seed == 3);
    CHECK(a.to_json() == b.to_json());
    CHECK(a.to_table() == b.to_table());
    const auto j = nlohmann::json::parse(a.to_json());
    CHECK(j["rows"].size() == 3);
    CHECK(j["policy"] == "instruction-following");
    CHECK(a.to_table().find("Communication (MB)") != std::string::npos);
  }
  SUBCASE("sample standard deviation") {
    const SuiteReport r = run_suite(c, {1, 2});
    const double x = r.rows[0].metrics.steps, y = r.rows[1].metrics.steps;
    CHECK(r.steps.mean == doctest::Approx((x + y) / 2));
    CHECK(r.steps.stddev == doctest::Approx(std::abs(x - y) / std::sqrt(2.0)));
  }
  CHECK_THROWS_AS(run_suite(c, {}), Error);
}

TEST_CASE("config json") {
  EpisodeConfig c;
  c.seed = 99;
  c.policy = PolicyKind::TeleopStream;
  c.mcts.iterations = 77;
  c.model.kind = "glpf";
  c.model.glpf.slope = 3.5;
  c.synthetic_human.alignment_bonus = 0.25;
  const EpisodeConfig back = episode_config_from_json(to_json(c));
  CHECK(back.seed == 99);
  CHECK(back.policy == PolicyKind::TeleopStream);
  CHECK(back.mcts.iterations == 77);
  CHECK(back.model.kind == "glpf");
  CHECK(back.model.glpf.slope == 3.5);
  CHECK(back.synthetic_human.alignment_bonus == 0.25);
  CHECK(to_json(back) == to_json(c));

  const EpisodeConfig partial = episode_config_from_json(R"({"v": 1, "seed": 5, "mcts": {"iterations": 9}})");
  CHECK(partial.seed == 5);
  CHECK(partial.mcts.iterations == 9);
  CHECK(partial.mcts.discount == 0.99);
  CHECK(partial.step_budget == 300);

  CHECK_THROWS_AS(episode_config_from_json(R"({"v": 2})"), Error);
  CHECK_THROWS_AS(episode_config_from_json(R"({"sead": 5})"), Error);
  CHECK_THROWS_AS(episode_config_from_json(R"({"step_budget": 0})"), Error);
  CHECK_THROWS_AS(episode_config_from_json(R"({"policy": "autopilot"})"), Error);
  CHECK_THROWS_AS(episode_config_from_json("not json"), Error);
  CHECK_THROWS_AS(episode_config_from_json(R"({"seed": "five"})"), Error);
}

TEST_CASE("metrics json") {
  const EpisodeMetrics m = run_episode(small_config(PolicyKind::InstructionFollowing, 2));
  const auto j = nlohmann::json::parse(metrics_to_json(m));
  CHECK(j["steps"] == m.steps);
  CHECK(j["turns"].size() == m.turns.size());
}
