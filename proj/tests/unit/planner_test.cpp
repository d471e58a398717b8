#include "doctest.h"

#include <cmath>
#include <sstream>

#include "conav/planner.hpp"

using namespace conav;

namespace {

struct Fixture {
  GridMaze maze;
  KnowledgeGrid knowledge;
  SynthPerception model{SynthHumanConfig{}};
  GridPlanningContext ctx;

  Fixture(std::string_view text, int radius, bool reveal_all) : maze(maze_from_text(text)) {
    knowledge = KnowledgeGrid(maze.height(), maze.width(), radius);
    if (reveal_all) {
      knowledge.labels = maze.cells;
    } else {
      knowledge = reveal(knowledge, {maze.start, Direction::North}, maze);
    }
    ctx.knowledge = &knowledge;
    ctx.goals = maze.goals;
    ctx.history = {maze.start};
    ctx.belief = std::make_shared<const BeliefMap>(BeliefMap::from_maze(maze));
    ctx.episode_visited = Grid<std::uint8_t>(maze.height(), maze.width(), 0);
    ctx.episode_visited[maze.start] = 1;
    ctx.model = &model;
  }
};

constexpr std::string_view kCorridor =
    "#####\n"
    "#S..G\n"
    "#####\n";

constexpr std::string_view kOpen =
    "#########\n"
    "#.......#\n"
    "#.......#\n"
    "#.......#\n"
    "#...S.G.#\n"
    "#.......#\n"
    "#.......#\n"
    "#.......#\n"
    "#########\n";

// Single-action chain 0 -> 1 -> ... -> n with fixed rewards.
struct ChainDomain {
  std::vector<double> rewards;
  std::vector<int> actions(const int& s) const { return s < static_cast<int>(rewards.size()) ? std::vector<int>{0} : std::vector<int>{}; }
  bool terminal(const int& s) const { return s >= static_cast<int>(rewards.size()); }
  Expansion<int> expand(const int& s, int) const { return {s + 1, rewards[static_cast<std::size_t>(s)], 1.0, false}; }
  RolloutResult rollout(const int& s, int budget, double gamma, Rng&) const {
    RolloutResult r;
    double w = 1.0;
    for (int t = s; t < static_cast<int>(rewards.size()) && r.steps < budget; ++t, ++r.steps) {
      r.value += w * rewards[static_cast<std::size_t>(t)];
      w *= gamma;
    }
    return r;
  }
};

// Three actions per node, every path exactly four steps long; rewards are
// scale * base + shift with base depending on the path.
struct FixedDepthDomain {
  double scale = 1.0;
  double shift = 0.0;
  static constexpr int kDepth = 4;
  double base_reward(const std::vector<int>& path) const {
    int h = 7;
    for (const int a : path) h = (h * 31 + a + 3) % 97;
    return static_cast<double>(h % 11) - 5.0;
  }
  std::vector<int> actions(const std::vector<int>& s) const {
    return static_cast<int>(s.size()) < kDepth ? std::vector<int>{0, 1, 2} : std::vector<int>{};
  }
  bool terminal(const std::vector<int>& s) const { return static_cast<int>(s.size()) >= kDepth; }
  Expansion<std::vector<int>> expand(const std::vector<int>& s, int a) const {
    std::vector<int> next = s;
    next.push_back(a);
    return {next, scale * base_reward(next) + shift, 1.0, false};
  }
  RolloutResult rollout(const std::vector<int>& s, int, double gamma, Rng& rng) const {
    RolloutResult r;
    std::vector<int> path = s;
    double w = 1.0;
    while (static_cast<int>(path.size()) < kDepth) {
      path.push_back(rng.below(3));
      r.value += w * (scale * base_reward(path) + shift);
      w *= gamma;
    }
    return r;
  }
};

}  // namespace

TEST_CASE("environment reward") {
  const RewardConfig rc;
  const std::vector<Cell> goals{{1, 4}};
  CHECK(r_env(std::vector<Cell>{{1, 3}, {1, 4}}, goals, rc) == 100.0);
  CHECK(r_env(std::vector<Cell>{{1, 2}, {1, 3}}, goals, rc) == -1.0);
  CHECK(r_env(std::vector<Cell>{{1, 4}, {1, 3}, {1, 4}}, goals, rc) == -1.0);
  CHECK_THROWS_AS(r_env(std::vector<Cell>{}, goals, rc), Error);
}

TEST_CASE("guidance reward") {
  const std::vector<int> zeta{1, 2, 3};
  CHECK(r_guidance(std::vector<int>{5, 2}, zeta) == 0.0);
  CHECK(r_guidance(std::vector<int>{9}, zeta) == 0.0);
  CHECK(r_guidance(std::vector<int>{4, 5, 6, 7, 8, 9, 10}, zeta) == doctest::Approx(-1.945910149055313).epsilon(1e-14));
  CHECK(r_guidance(std::vector<int>{4, 5}, std::vector<int>{}) == doctest::Approx(-std::log(2.0)));
}

TEST_CASE("smoothness reward") {
  CHECK(r_smooth(std::vector<int>{1, 2, 3}) == 0.0);
  CHECK(r_smooth(std::vector<int>{1, 2, 1}) == -1.0);
  CHECK(r_smooth(std::vector<int>{1, 1, 1}) == -2.0);
}

TEST_CASE("communication cost") {
  const RewardConfig rc;
  auto none = [](int) { return false; };
  auto all = [](int) { return true; };
  CHECK(comm_cost(std::vector<int>{}, none, rc) == 10.0);
  CHECK(comm_cost(std::vector<int>{1, 2, 3}, all, rc) == 10.0);
  CHECK(comm_cost(std::vector<int>{1, 2, 3, 4, 5, 6}, [](int s) { return s <= 2; }, rc) == 14.0);
}

TEST_CASE("UCT selection") {
  SearchTree<int> t;
  t.add_root(0, {0, 1, 2}, false);
  SUBCASE("single child") {
    SearchTree<int> one;
    one.add_root(0, {0}, false);
    one[0].untried.clear();
    const int c = one.add_child(0, 0, 1, 0.0, 1.0, false, {});
    one[c].visits = 1;
    one[0].visits = 1;
    CHECK(one.select(0, 1.4) == c);
  }
  t[0].untried.clear();
  const int a = t.add_child(0, 0, 1, 0.0, 1.0, false, {});
  const int b = t.add_child(0, 1, 2, 0.0, 1.0, false, {});
  t[0].visits = 10;
  SUBCASE("equal means prefer fewer visits") {
    t[a].visits = 6;
    t[a].value = 6.0;
    t[b].visits = 4;
    t[b].value = 4.0;
    CHECK(t.select(0, 1.0) == b);
  }
  SUBCASE("zero exploration is greedy") {
    t[a].visits = 2;
    t[a].value = 3.0;
    t[b].visits = 8;
    t[b].value = 8.0;
    CHECK(t.select(0, 0.0) == a);
  }
  SUBCASE("ties go to the first child") {
    t[a].visits = t[b].visits = 5;
    t[a].value = t[b].value = 1.0;
    CHECK(t.select(0, 1.0) == a);
  }
  SUBCASE("unvisited child violates the contract") {
    t[a].visits = 3;
    CHECK_THROWS_AS(t.select(0, 1.0), Error);
  }
}

TEST_CASE("feasibility-weighted backpropagation") {
  // root -> mid (r = 1, delta = 1) -> leaf (r = 4, delta = 0.5); mid holds Q/N = 2.
  SearchTree<int> t;
  t.add_root(0, {}, false);
  const int mid = t.add_child(0, 0, 1, 1.0, 1.0, false, {});
  const int leaf = t.add_child(mid, 0, 2, 4.0, 0.5, false, {});
  t[0].visits = 1;
  t[0].value = 2.5;
  t[mid].visits = 1;
  t[mid].value = 2.0;
  t.backpropagate(leaf, 0.0, 0.99);
  CHECK(t[leaf].value == 4.0);
  CHECK(t[leaf].visits == 1);
  const double to_mid = t[mid].value - 2.0;
  CHECK(to_mid == doctest::Approx(3.97).epsilon(1e-14));
  CHECK(t[mid].value == 2.0 + (1.0 + 0.99 * (0.5 * 4.0 + 0.5 * 2.0)));
  CHECK(t[mid].visits == 2);
  // delta = 1 into mid: the root takes the sample unchanged.
  CHECK(t[0].value == doctest::Approx(2.5 + to_mid).epsilon(1e-14));
  CHECK(t[0].visits == 2);

  SUBCASE("leaf sample adds its own transition reward") {
    SearchTree<int> u;
    u.add_root(0, {}, false);
    const int c = u.add_child(0, 0, 1, -1.0, 1.0, false, {});
    u.backpropagate(c, 10.0, 0.5);
    CHECK(u[c].value == -1.0 + 0.5 * 10.0);
    CHECK(u[0].value == -1.0 + 0.5 * 10.0);
  }
  SUBCASE("unvisited parent falls back to zero") {
    SearchTree<int> u;
    u.add_root(0, {}, false);
    const int m = u.add_child(0, 0, 1, 1.0, 1.0, false, {});
    const int c = u.add_child(m, 0, 2, 4.0, 0.5, false, {});
    u.backpropagate(c, 0.0, 0.99);
    CHECK(u[m].value == doctest::Approx(1.0 + 0.99 * 2.0));
  }
}

TEST_CASE("root value converges on a deterministic chain") {
  const ChainDomain chain{{-1.0, -1.0, 3.0, -1.0, 100.0, -2.0}};
  MctsConfig cfg;
  cfg.iterations = 10000;
  Rng rng(1);
  const SearchResult<int> r = mcts_search(chain, 0, cfg, rng);
  double truth = 0.0, w = 1.0;
  for (const double x : chain.rewards) {
    truth += w * x;
    w *= cfg.discount;
  }
  CHECK(r.tree[0].visits == 10000);
  CHECK(std::abs(r.tree[0].value / r.tree[0].visits - truth) < 1e-6);
}

TEST_CASE("expansion") {
  Fixture f(kOpen, 1, false);
  GridPlanningDomain d(f.ctx);
  const GridState root = d.root_state();
  SUBCASE("known free and unknown targets") {
    const auto east = d.expand(root, Action::move(Direction::East).index());
    CHECK(east.feasibility == 1.0);
    CHECK_FALSE(east.stopping);
    CHECK(east.state.tau.size() == 2);
    CHECK(east.state.belief == root.belief);
    const auto e2 = d.expand(east.state, Action::move(Direction::East).index());
    CHECK(e2.feasibility == 1.0);  // goals are free by construction
    CHECK(e2.state.goal_reached);
    CHECK(e2.reward == doctest::Approx(100.0 - std::log(3.0)));
    const auto north = d.expand(east.state, Action::move(Direction::North).index());
    CHECK(f.knowledge[{3, 5}] == CellLabel::Free);
    CHECK(north.feasibility == 1.0);
    const auto far = d.expand(north.state, Action::move(Direction::North).index());
    CHECK(f.knowledge[{2, 5}] == CellLabel::Unknown);
    CHECK(far.feasibility == 0.5);
  }
  SUBCASE("communication stops and costs at least the base cost") {
    const auto east = d.expand(root, Action::move(Direction::East).index());
    const auto comm = d.expand(east.state, Action::communicate(Direction::East).index());
    CHECK(comm.stopping);
    CHECK(comm.state.communicated);
    // Stopping ends the descent; the node itself stays open and history restarts.
    CHECK_FALSE(d.terminal(comm.state));
    CHECK(comm.state.tau == std::vector<Cell>{east.state.tau.back()});
    CHECK(comm.state.belief != root.belief);
  }
  SUBCASE("communication reward at the root") {
    const auto comm = d.expand(root, Action::communicate(Direction::East).index());
    // Belief equals truth, so only false edits contribute to the gain.
    const auto direct = d.communicate(root, Direction::East);
    CHECK(direct.cost == 10.0);
    CHECK(direct.gain > 0.0);
    CHECK(direct.gain < 0.5);
    CHECK(comm.reward == direct.gain - 10.0);
  }
  SUBCASE("known walls are not offered") {
    Fixture c(kCorridor, 1, true);
    GridPlanningDomain dc(c.ctx);
    const std::vector<int> acts = dc.actions(dc.root_state());
    CHECK(acts == std::vector<int>{Action::move(Direction::East).index(), 4, 5, 6, 7});
  }
}

TEST_CASE("rollout") {
  SUBCASE("terminal node returns zero") {
    Fixture f(kCorridor, 1, true);
    GridPlanningDomain d(f.ctx);
    GridState s = d.root_state();
    s.goal_reached = true;
    Rng rng(1);
    CHECK(d.rollout(s, 100, 0.99, rng).value == 0.0);
  }
  SUBCASE("straight walk down a corridor") {
    Fixture f(kCorridor, 1, true);
    f.ctx.communication_enabled = false;
    f.ctx.guidance.cells = {{1, 1}, {1, 2}, {1, 3}, {1, 4}};
    f.ctx.history = {{1, 2}};
    GridPlanningDomain d(f.ctx);
    Rng rng(5);
    int straight = 0;
    for (int i = 0; i < 2000; ++i) {
      const RolloutResult r = d.rollout(d.root_state(), 100, 0.99, rng);
      CHECK(r.reached_goal);
      if (r.steps == 2) {
        ++straight;
        CHECK(r.value == -1.0 + 0.99 * 100.0);
      }
    }
    CHECK(straight > 0);
  }
  SUBCASE("moves into unknown cells fail half the time") {
    Fixture f(kOpen, 0, false);
    f.ctx.communication_enabled = false;
    f.ctx.goals = {};
    GridPlanningDomain d(f.ctx);
    Rng rng(11);
    long attempts = 0, failures = 0;
    while (attempts < 10000) {
      const RolloutResult r = d.rollout(d.root_state(), 20, 0.99, rng);
      attempts += r.uncertain_moves;
      failures += r.failed_moves;
    }
    const double rate = static_cast<double>(failures) / static_cast<double>(attempts);
    MESSAGE("failure rate " << rate << " over " << attempts);
    CHECK(rate >= 0.485);
    CHECK(rate <= 0.515);
  }
  SUBCASE("at most one communication, always last") {
    Fixture f(kOpen, 1, false);
    GridPlanningDomain d(f.ctx);
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
      const RolloutResult r = d.rollout(d.root_state(), 100, 0.99, rng);
      CHECK((r.communicated || r.reached_goal || r.steps == 100));
    }
  }
}

TEST_CASE("plan") {
  SUBCASE("adjacent known goal") {
    Fixture f(kOpen, 1, true);
    f.ctx.history = {{4, 5}};
    f.ctx.episode_visited[{4, 5}] = 1;
    Rng rng(2);
    const Action a = plan_grid(f.ctx, MctsConfig{}, rng);
    CHECK(a == Action::move(Direction::East));
  }
  SUBCASE("seeded search is reproducible including its trace") {
    Fixture f(kOpen, 1, false);
    std::ostringstream t1, t2;
    Rng r1(9), r2(9);
    const Action a1 = plan_grid(f.ctx, MctsConfig{}, r1, &t1);
    const Action a2 = plan_grid(f.ctx, MctsConfig{}, r2, &t2);
    CHECK(a1 == a2);
    CHECK(t1.str() == t2.str());
    int lines = 0;
    for (const char ch : t1.str()) lines += ch == '\n';
    CHECK(lines == 100);
  }
  SUBCASE("only one legal action") {
    Fixture f(kCorridor, 1, true);
    f.ctx.communication_enabled = false;
    Rng rng(4);
    CHECK(plan_grid(f.ctx, MctsConfig{}, rng) == Action::move(Direction::East));
  }
  SUBCASE("no legal action") {
    Fixture f("###\n#S#\n###\n#G#\n###\n", 1, true);
    f.ctx.communication_enabled = false;
    Rng rng(4);
    try {
      plan_grid(f.ctx, MctsConfig{}, rng);
      FAIL("expected a planning failure");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::PlanningFailure);
    }
  }
  SUBCASE("tree visit counts are consistent") {
    Fixture f(kOpen, 1, false);
    const GridPlanningDomain d(f.ctx);
    MctsConfig cfg;
    cfg.iterations = 300;
    Rng rng(6);
    const SearchResult<GridState> r = mcts_search(d, d.root_state(), cfg, rng);
    int ended = 0;
    for (std::size_t i = 0; i < r.tree.size(); ++i) {
      int child_sum = 0;
      for (const int c : r.tree[static_cast<int>(i)].children) child_sum += r.tree[c].visits;
      CHECK(r.tree[static_cast<int>(i)].visits >= child_sum);
      ended += r.tree[static_cast<int>(i)].visits - child_sum;
    }
    CHECK(ended == 300);
    CHECK(r.tree[0].visits == 300);
  }
}

TEST_CASE("choice is invariant under affine reward rescaling with scaled exploration") {
  for (const double shift : {0.0, 0.5}) {
    const FixedDepthDomain base{1.0, 0.0};
    const FixedDepthDomain scaled{4.0, shift};
    MctsConfig c1, c4;
    c1.iterations = c4.iterations = 400;
    c4.exploration = 4.0 * c1.exploration;
    Rng r1(12), r2(12);
    const SearchResult<std::vector<int>> a = mcts_search(base, std::vector<int>{}, c1, r1);
    const SearchResult<std::vector<int>> b = mcts_search(scaled, std::vector<int>{}, c4, r2);
    CHECK(a.action == b.action);
    for (std::size_t i = 0; i < a.tree[0].children.size(); ++i)
      CHECK(a.tree[a.tree[0].children[i]].visits == b.tree[b.tree[0].children[i]].visits);
  }
}
