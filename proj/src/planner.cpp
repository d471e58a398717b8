#include "conav/planner.hpp"

namespace conav {

void RewardConfig::validate() const {
  if (!(goal_reward > 0.0)) throw Error(ErrorCode::InvalidConfiguration, "goal reward must be > 0");
  if (!(comm_base_cost >= 0.0)) throw Error(ErrorCode::InvalidConfiguration, "communication cost must be >= 0");
}

NhpmPerception::NhpmPerception(ConvModelParams params, bool symmetrized)
    : params_(std::move(params)), symmetrized_(symmetrized) {}

EditProbabilities NhpmPerception::predict(const BeliefMap& belief, const std::vector<Cell>& path,
                                          const Observation& obs) const {
  Segment s{belief, path, obs, belief};
  const InputTensor input = encode(s);
  return symmetrized_ ? conav::predict(params_, input) : forward(params_, input);
}

GlpfPerception::GlpfPerception(GlpfParams params) : params_(params) { params_.validate(); }

EditProbabilities GlpfPerception::predict(const BeliefMap& belief, const std::vector<Cell>&,
                                          const Observation& obs) const {
  return glpf_predict(belief, obs, params_);
}

SynthPerception::SynthPerception(SynthHumanConfig config) : config_(config) { config_.validate(); }

EditProbabilities SynthPerception::predict(const BeliefMap& belief, const std::vector<Cell>& path,
                                           const Observation& obs) const {
  return synth_true_probs(belief, path, obs, config_);
}

BeliefMap expected_update(const BeliefMap& belief, const EditProbabilities& probs) {
  EditMask m(belief.height(), belief.width());
  for (std::size_t i = 0; i < m.add.size(); ++i) {
    m.add.data()[i] = probs.add.data()[i] >= 0.5;
    m.remove.data()[i] = probs.remove.data()[i] >= 0.5;
  }
  return apply_edit(belief, m);
}

Observation predicted_observation(const KnowledgeGrid& knowledge, RobotPose camera,
                                  const VisibilityConfig& config) {
  GridMaze optimistic;
  optimistic.cells = knowledge.labels;
  for (CellLabel& l : optimistic.cells.data())
    if (l == CellLabel::Unknown) l = CellLabel::Free;
  optimistic.start = camera.cell;
  const Observation all = visible_cells(optimistic, camera, config);
  Observation out;
  out.camera = camera;
  for (std::size_t i = 0; i < all.visible.size(); ++i) {
    if (knowledge[all.visible[i]] == CellLabel::Unknown) continue;
    out.visible.push_back(all.visible[i]);
    out.labels.push_back(all.labels[i]);
  }
  return out;
}

namespace {

std::string comm_key(const std::vector<Cell>& tau, int width, int height, Direction d) {
  std::string key(static_cast<std::size_t>(width * height + 7) / 8 + 3, '\0');
  for (const Cell c : tau) {
    const std::size_t i = static_cast<std::size_t>(c.row) * width + c.col;
    key[i / 8] = static_cast<char>(key[i / 8] | (1 << (i % 8)));
  }
  const std::size_t n = key.size();
  key[n - 3] = static_cast<char>(tau.back().row);
  key[n - 2] = static_cast<char>(tau.back().col);
  key[n - 1] = static_cast<char>(d);
  return key;
}

}  // namespace

GridPlanningDomain::GridPlanningDomain(const GridPlanningContext& context) : ctx_(context) {
  if (ctx_.knowledge == nullptr || ctx_.model == nullptr || !ctx_.belief) {
    throw Error(ErrorCode::InvalidArgument, "planning context needs knowledge, a model and a belief");
  }
  if (ctx_.history.empty()) throw Error(ErrorCode::InvalidArgument, "empty state history");
  if (!ctx_.knowledge->labels.same_shape(ctx_.belief->labels) ||
      !ctx_.knowledge->labels.same_shape(ctx_.episode_visited)) {
    throw Error(ErrorCode::InvalidArgument, "planning context grids differ in shape");
  }
  ctx_.rewards.validate();
}

GridState GridPlanningDomain::root_state() const { return {ctx_.history, ctx_.belief, false, false}; }

bool GridPlanningDomain::is_goal(Cell c) const { return contains(ctx_.goals, c); }

std::vector<int> GridPlanningDomain::actions(const GridState& s) const {
  std::vector<int> out;
  const Cell here = s.tau.back();
  for (const Direction d : kDirections) {
    const Cell next = step(here, d);
    if (!ctx_.knowledge->labels.in_bounds(next) || (*ctx_.knowledge)[next] == CellLabel::Wall) continue;
    out.push_back(Action::move(d).index());
  }
  if (ctx_.communication_enabled)
    for (const Direction d : kDirections) out.push_back(Action::communicate(d).index());
  return out;
}

double GridPlanningDomain::move_reward(const std::vector<Cell>& tau) const {
  return task_reward(tau, ctx_.goals, ctx_.guidance.cells, ctx_.rewards);
}

GridPlanningDomain::CommOutcome GridPlanningDomain::communicate(const GridState& s, Direction camera) const {
  const int h = ctx_.belief->height(), w = ctx_.belief->width();
  // States below no communication share the root belief, so the outcome
  // depends only on the cells of tau, the camera cell and the direction.
  const bool cacheable = s.belief == ctx_.belief;
  std::string key;
  if (cacheable) {
    key = comm_key(s.tau, w, h, camera);
    if (const auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  const Observation obs = predicted_observation(*ctx_.knowledge, {s.tau.back(), camera}, ctx_.camera);
  const EditProbabilities p = ctx_.model->predict(*s.belief, s.tau, obs);
  CommOutcome out;
  out.gain = expected_info_gain(p);
  out.cost = comm_cost(ctx_.guidance.cells,
                       [&](Cell c) { return ctx_.episode_visited[c] != 0 || contains(s.tau, c); },
                       ctx_.rewards);
  out.belief = std::make_shared<const BeliefMap>(expected_update(*s.belief, p));
  if (cacheable) cache_.emplace(std::move(key), out);
  return out;
}

Expansion<GridState> GridPlanningDomain::expand(const GridState& s, int action) const {
  const Action a = Action::from_index(action);
  Expansion<GridState> e;
  if (a.is_communicate()) {
    const CommOutcome c = communicate(s, a.direction);
    e.state = {{s.tau.back()}, c.belief, false, true};
    e.reward = c.gain - c.cost;
    e.stopping = true;
    return e;
  }
  const Cell next = step(s.tau.back(), a.direction);
  e.state = {s.tau, s.belief, false, false};
  e.state.tau.push_back(next);
  e.reward = move_reward(e.state.tau);
  e.feasibility = (*ctx_.knowledge)[next] == CellLabel::Unknown && !is_goal(next) ? 0.5 : 1.0;
  e.state.goal_reached = is_goal(next) && !contains(s.tau, next);
  return e;
}

RolloutResult GridPlanningDomain::rollout(const GridState& start, int depth_budget, double discount,
                                          Rng& rng) const {
  RolloutResult out;
  if (terminal(start)) return out;
  GridState s = start;
  double weight = 1.0;
  std::vector<Direction> moves;
  for (int d = 0; d < depth_budget; ++d) {
    moves.clear();
    const Cell here = s.tau.back();
    for (const Direction dir : kDirections) {
      const Cell next = step(here, dir);
      if (ctx_.knowledge->labels.in_bounds(next) && (*ctx_.knowledge)[next] != CellLabel::Wall) moves.push_back(dir);
    }
    const int options = static_cast<int>(moves.size()) + (ctx_.communication_enabled ? 1 : 0);
    if (options == 0) break;
    const int pick = rng.below(options);
    ++out.steps;
    if (pick == static_cast<int>(moves.size())) {
      const CommOutcome c = communicate(s, kDirections[static_cast<std::size_t>(rng.below(4))]);
      out.value += weight * (c.gain - c.cost);
      out.communicated = true;
      break;
    }
    Cell next = step(here, moves[static_cast<std::size_t>(pick)]);
    if ((*ctx_.knowledge)[next] == CellLabel::Unknown && !is_goal(next)) {
      ++out.uncertain_moves;
      if (rng.bernoulli(0.5)) {
        ++out.failed_moves;
        next = here;
      }
    }
    const bool new_goal = is_goal(next) && !contains(s.tau, next);
    s.tau.push_back(next);
    out.value += weight * move_reward(s.tau);
    weight *= discount;
    if (new_goal) {
      out.reached_goal = true;
      break;
    }
  }
  return out;
}

Action plan_grid(const GridPlanningContext& context, const MctsConfig& config, Rng& rng, std::ostream* trace) {
  const GridPlanningDomain domain(context);
  const SearchResult<GridState> r = mcts_search(domain, domain.root_state(), config, rng, trace);
  return Action::from_index(r.action);
}

}  // namespace conav
