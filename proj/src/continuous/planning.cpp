#include <algorithm>
#include <cmath>

#include "conav/continuous.hpp"

namespace conav {

namespace {

void append_unique(std::vector<int>& nodes, int n) {
  if (n >= 0 && !contains(nodes, n)) nodes.push_back(n);
}

std::vector<int> nodes_along(const VoronoiGraph& g, const std::vector<Cell>& pixels) {
  std::vector<int> out;
  for (const Cell p : pixels) {
    const int n = g.node_at(p);
    if (n >= 0 && (out.empty() || out.back() != n)) out.push_back(n);
  }
  return out;
}

/// Where the robot stands after hopping into `node`: its centroid pixel, or
/// its seed when the centroid pixel lies outside the region.
Cell hop_target(const VoronoiGraph& g, int node) {
  const Cell c = nearest_pixel(g.centroids[static_cast<std::size_t>(node)]);
  return g.node_at(c) == node ? c : g.seeds[static_cast<std::size_t>(node)];
}

}  // namespace

ContinuousPlanningDomain::ContinuousPlanningDomain(const ContinuousPlanningContext& context) : ctx_(context) {
  if (ctx_.graph == nullptr || ctx_.knowledge == nullptr || !ctx_.belief) {
    throw Error(ErrorCode::InvalidArgument, "planning context needs a graph, knowledge and a belief");
  }
  if (ctx_.communication_enabled && ctx_.model == nullptr) {
    throw Error(ErrorCode::InvalidArgument, "communication needs a perception model");
  }
  const int agent = ctx_.graph->node_at(ctx_.robot);
  if (agent < 0) throw Error(ErrorCode::InvalidPose, "the robot is not inside any region");
  if (ctx_.history.empty() || ctx_.history.back() != agent) {
    throw Error(ErrorCode::InvalidArgument, "history must end at the agent node");
  }
  if (ctx_.goal_node < 0 || ctx_.goal_node >= ctx_.graph->size()) {
    throw Error(ErrorCode::InvalidArgument, "goal node outside the graph");
  }
  normalizer_ = ctx_.graph->mean_edge_length();
  guidance_rank_.assign(static_cast<std::size_t>(ctx_.graph->size()), -1);
  for (std::size_t i = 0; i < ctx_.guidance.size(); ++i) {
    int& rank = guidance_rank_.at(static_cast<std::size_t>(ctx_.guidance[i]));
    if (rank < 0) rank = static_cast<int>(i);
  }
  hops_to_goal_.assign(static_cast<std::size_t>(ctx_.graph->size()), -1);
  std::vector<int> frontier{ctx_.goal_node};
  hops_to_goal_[static_cast<std::size_t>(ctx_.goal_node)] = 0;
  for (std::size_t i = 0; i < frontier.size(); ++i) {
    const int v = frontier[i];
    for (const int e : ctx_.graph->adjacency[static_cast<std::size_t>(v)]) {
      const int w = ctx_.graph->neighbor(v, e);
      if (hops_to_goal_[static_cast<std::size_t>(w)] >= 0) continue;
      hops_to_goal_[static_cast<std::size_t>(w)] = hops_to_goal_[static_cast<std::size_t>(v)] + 1;
      frontier.push_back(w);
    }
  }
}

ContinuousState ContinuousPlanningDomain::root_state() const {
  return {ctx_.history, ctx_.belief, false, -1};
}

std::vector<int> ContinuousPlanningDomain::actions(const ContinuousState& s) const {
  std::vector<int> out;
  const int v = s.tau.back();
  for (const int e : ctx_.graph->adjacency[static_cast<std::size_t>(v)]) out.push_back(ctx_.graph->neighbor(v, e));
  const bool may_communicate = ctx_.communication_enabled && s.last_comm < 0 &&
                               s.tau.size() < ctx_.history.size() + static_cast<std::size_t>(ctx_.comm_horizon);
  if (may_communicate) {
    for (int k = 0; k < kCommAngles; ++k)
      if (communicate(s, k).gain > ctx_.comm_cost) out.push_back(ctx_.graph->size() + k);
  }
  return out;
}

double ContinuousPlanningDomain::move_reward(const std::vector<int>& tau, double length) const {
  double env = r_env(tau, std::vector<int>{ctx_.goal_node}, ctx_.rewards);
  if (env != ctx_.rewards.goal_reward) env *= length / normalizer_;
  return env + r_guidance(tau, ctx_.guidance) + r_smooth(tau);
}

Cell ContinuousPlanningDomain::pose_of(const std::vector<int>& tau) const {
  if (tau.back() == ctx_.history.back()) return ctx_.robot;
  return hop_target(*ctx_.graph, tau.back());
}

const std::vector<Cell>& ContinuousPlanningDomain::visible_from(Cell pose) const {
  const int key = static_cast<int>(ctx_.knowledge->index(pose));
  auto it = visible_cache_.find(key);
  if (it == visible_cache_.end()) it = visible_cache_.emplace(key, visible_pixels(*ctx_.knowledge, pose)).first;
  return it->second;
}

ContinuousPlanningDomain::CommOutcome ContinuousPlanningDomain::communicate(const ContinuousState& s,
                                                                           int angle_index) const {
  // Below no communication every state shares the root belief, so the
  // outcome is a function of tau and the angle.
  const bool cacheable = s.belief == ctx_.belief;
  std::string key;
  if (cacheable) {
    for (const int v : s.tau) key += std::to_string(v) + ',';
    key += std::to_string(angle_index);
    if (const auto it = comm_cache_.find(key); it != comm_cache_.end()) return it->second;
  }
  const Cell pose = pose_of(s.tau);
  const Observation obs = cone_observation(*ctx_.knowledge, pose, comm_angle(angle_index), visible_from(pose));
  std::vector<Cell> path;
  std::size_t first_new = static_cast<std::size_t>(s.last_comm);
  if (s.last_comm < 0) {
    path = ctx_.trail;
    first_new = ctx_.history.size();
  }
  for (std::size_t i = first_new; i < s.tau.size(); ++i) path.push_back(hop_target(*ctx_.graph, s.tau[i]));
  const EditProbabilities p = ctx_.model->predict(*s.belief, path, obs);
  CommOutcome out;
  out.gain = expected_info_gain(p);
  out.belief = std::make_shared<const BeliefMap>(expected_update(*s.belief, p));
  if (cacheable) comm_cache_.emplace(std::move(key), out);
  return out;
}

Expansion<ContinuousState> ContinuousPlanningDomain::expand(const ContinuousState& s, int action) const {
  const int n = ctx_.graph->size();
  Expansion<ContinuousState> e;
  if (action >= n) {
    const CommOutcome c = communicate(s, action - n);
    e.state = {s.tau, c.belief, false, static_cast<int>(s.tau.size()) - 1};
    e.reward = c.gain - ctx_.comm_cost;
    e.stopping = true;
    return e;
  }
  const GraphEdge* edge = ctx_.graph->edge_between(s.tau.back(), action);
  if (edge == nullptr) throw Error(ErrorCode::ContractViolation, "hop between non-adjacent nodes");
  e.state = {s.tau, s.belief, false, s.last_comm};
  e.state.tau.push_back(action);
  e.reward = move_reward(e.state.tau, edge->length);
  e.feasibility = edge->uncertain && action != ctx_.goal_node ? 0.5 : 1.0;
  e.state.goal_reached = action == ctx_.goal_node && !contains(s.tau, action);
  return e;
}

int ContinuousPlanningDomain::guided_hop(int here) const {
  const auto& adj = ctx_.graph->adjacency[static_cast<std::size_t>(here)];
  const int rank = guidance_rank_[static_cast<std::size_t>(here)];
  int best = -1, best_rank = rank;
  if (rank >= 0) {
    for (std::size_t i = 0; i < adj.size(); ++i) {
      const int r = guidance_rank_[static_cast<std::size_t>(ctx_.graph->neighbor(here, adj[i]))];
      if (r > best_rank) {
        best_rank = r;
        best = static_cast<int>(i);
      }
    }
    if (best >= 0) return best;
  }
  int best_hops = hops_to_goal_[static_cast<std::size_t>(here)];
  for (std::size_t i = 0; i < adj.size(); ++i) {
    const int h = hops_to_goal_[static_cast<std::size_t>(ctx_.graph->neighbor(here, adj[i]))];
    if (h >= 0 && (best_hops < 0 || h < best_hops)) {
      best_hops = h;
      best = static_cast<int>(i);
    }
  }
  return best;
}

RolloutResult ContinuousPlanningDomain::rollout(const ContinuousState& start, int depth_budget, double discount,
                                                Rng& rng) const {
  RolloutResult out;
  if (terminal(start)) return out;
  ContinuousState s = start;
  double weight = 1.0;
  for (int d = 0; d < depth_budget; ++d) {
    const int here = s.tau.back();
    const auto& adj = ctx_.graph->adjacency[static_cast<std::size_t>(here)];
    if (adj.empty()) break;
    int pick = rng.below(static_cast<int>(adj.size()));
    if (rng.bernoulli(kGuidedHop)) {
      const int next = guided_hop(here);
      if (next >= 0) pick = next;
    }
    ++out.steps;
    const GraphEdge& edge = ctx_.graph->edges[static_cast<std::size_t>(adj[static_cast<std::size_t>(pick)])];
    int next = ctx_.graph->neighbor(here, adj[static_cast<std::size_t>(pick)]);
    if (edge.uncertain && next != ctx_.goal_node) {
      ++out.uncertain_moves;
      if (rng.bernoulli(0.5)) {
        ++out.failed_moves;
        next = here;
      }
    }
    const bool new_goal = next == ctx_.goal_node && !contains(s.tau, next);
    s.tau.push_back(next);
    out.value += weight * move_reward(s.tau, edge.length);
    weight *= discount;
    if (new_goal) {
      out.reached_goal = true;
      break;
    }
  }
  return out;
}

ContinuousAction plan_continuous(const ContinuousPlanningContext& context, const MctsConfig& config, Rng& rng) {
  const ContinuousPlanningDomain domain(context);
  const int agent = context.history.back();
  if (context.graph->adjacency[static_cast<std::size_t>(agent)].empty()) {
    throw Error(ErrorCode::PlanningFailure, "the agent node has no neighbours");
  }
  const SearchResult<ContinuousState> r = mcts_search(domain, domain.root_state(), config, rng);
  if (r.action >= context.graph->size()) return {true, r.action - context.graph->size()};
  return {false, r.action};
}

SynthHumanConfig continuous_human_config() {
  SynthHumanConfig c;
  c.decay = 0.35 * 13.0 / kTerrainSize;
  c.false_edit_rate = 0.0;
  return c;
}

std::string to_string(ContinuousPolicy p) { return p == ContinuousPolicy::IgMcts ? "ig-mcts" : "greedy-bfs"; }

ContinuousPolicy continuous_policy_from_string(const std::string& name) {
  if (name == "ig-mcts") return ContinuousPolicy::IgMcts;
  if (name == "greedy-bfs") return ContinuousPolicy::GreedyBfs;
  throw Error(ErrorCode::InvalidConfiguration, "unknown continuous policy '" + name + "'");
}

ContinuousEpisodeResult run_continuous_episode(const TerrainMap& terrain, const BeliefMap& human_map,
                                               const ContinuousEpisodeConfig& config,
                                               const PerceptionModel* model) {
  config.mcts.validate();
  config.seeds.validate();
  config.human.validate();
  if (!human_map.labels.same_shape(terrain.traversable)) {
    throw Error(ErrorCode::InvalidArgument, "operator map and terrain differ in size");
  }
  Rng root(config.seed);
  Rng seed_rng = root.fork(1), human_rng = root.fork(2), plan_rng = root.fork(3);
  std::unique_ptr<PerceptionModel> owned;
  if (model == nullptr) {
    owned = std::make_unique<SynthPerception>(config.human);
    model = owned.get();
  }
  const bool ig = config.policy == ContinuousPolicy::IgMcts;

  ContinuousEpisodeResult out;
  Cell robot = terrain.start;
  out.knowledge = observe_radial(terrain, robot, {});
  out.trajectory = {robot};
  BeliefMap initial = human_map;
  initial.fixed_border = false;
  auto belief = std::make_shared<const BeliefMap>(std::move(initial));
  std::vector<Cell> guidance;
  if (ig) {
    guidance = belief_path(*belief, robot, terrain.goal);
    out.guidance.push_back(guidance);
  }
  std::vector<Cell> trail{robot}, visited{robot};
  auto rebuild = [&] { out.graph = build_graph(out.knowledge.labels, sample_seeds(out.knowledge.labels, config.seeds, seed_rng)); };
  rebuild();

  for (int turn = 0; turn < config.max_turns; ++turn) {
    const VoronoiGraph& g = out.graph;
    const int agent = g.node_at(robot), goal = g.node_at(terrain.goal);
    if (agent == goal) {
      out.reached_goal = true;
      break;
    }
    if (g.adjacency[static_cast<std::size_t>(agent)].empty()) {
      rebuild();
      continue;
    }
    int target = -1;
    if (ig) {
      ContinuousPlanningContext ctx;
      ctx.graph = &g;
      ctx.knowledge = &out.knowledge.labels;
      ctx.robot = robot;
      ctx.goal_node = goal;
      for (const int n : nodes_along(g, guidance)) append_unique(ctx.guidance, n);
      for (const int n : nodes_along(g, visited))
        if (n != goal) ctx.history.push_back(n);
      ctx.trail = trail;
      ctx.belief = belief;
      ctx.model = model;
      ctx.rewards = config.rewards;
      ctx.comm_cost = config.comm_cost;
      const ContinuousAction a = plan_continuous(ctx, config.mcts, plan_rng);
      if (a.communicate) {
        const Observation obs = cone_observation(out.knowledge.labels, robot, comm_angle(a.target));
        OperatorState st{*belief, {}, {}};
        st = synth_update(std::move(st), obs, trail, config.human, human_rng);
        belief = std::make_shared<const BeliefMap>(std::move(st.belief));
        guidance = belief_path(*belief, robot, terrain.goal);
        out.guidance.push_back(guidance);
        ++out.communications;
        trail = {robot};
        visited = {robot};
        continue;
      }
      target = a.target;
    } else {
      const std::vector<int> path = greedy_bfs(g, agent, goal);
      if (path.size() < 2) {
        rebuild();
        continue;
      }
      target = path[1];
    }

    const Cell dest = hop_target(g, target);
    const std::vector<Cell> segment = segment_pixels(to_point(robot), to_point(dest));
    const auto blocked = std::find_if(segment.begin(), segment.end(), [&](Cell p) { return !terrain.traversable[p]; });
    if (blocked != segment.end()) {
      out.knowledge.labels[*blocked] = CellLabel::Wall;
      ++out.bumps;
      rebuild();
      continue;
    }
    out.path_length += distance(to_point(robot), to_point(dest));
    ++out.hops;
    trail.insert(trail.end(), segment.begin() + 1, segment.end());
    robot = dest;
    visited.push_back(robot);
    out.trajectory.push_back(robot);
    const LabelGrid before = out.knowledge.labels;
    out.knowledge = observe_radial(terrain, robot, std::move(out.knowledge));
    if (out.knowledge.labels != before) rebuild();
  }
  out.human_belief = *belief;
  return out;
}

Showcase dead_end_showcase() {
  const int n = kTerrainSize;
  Grid<std::uint8_t> open(n, n, 1);
  auto fill = [](Grid<std::uint8_t>& g, int r0, int r1, int c0, int c1, std::uint8_t v) {
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c) g.at(r, c) = v;
  };
  auto disc = [](Grid<std::uint8_t>& g, Cell centre, int radius, std::uint8_t v) {
    for (int r = centre.row - radius; r <= centre.row + radius; ++r)
      for (int c = centre.col - radius; c <= centre.col + radius; ++c)
        if (g.in_bounds({r, c}) && (r - centre.row) * (r - centre.row) + (c - centre.col) * (c - centre.col) <= radius * radius)
          g.at(r, c) = v;
  };
  fill(open, 55, 59, 40, 130, 0);
  fill(open, 91, 95, 40, 130, 0);
  fill(open, 55, 95, 126, 130, 0);
  disc(open, {66, 22}, 3, 0);

  Grid<std::uint8_t> believed = open;
  disc(believed, {66, 22}, 3, 1);
  disc(believed, {50, 36}, 3, 0);

  Showcase s;
  s.terrain = terrain_from_mask(open, {75, 10}, {75, 142});
  LabelGrid labels(n, n, CellLabel::Wall);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (believed.data()[i]) labels.data()[i] = CellLabel::Free;
  s.human_map = BeliefMap(std::move(labels), false);
  return s;
}

}  // namespace conav
