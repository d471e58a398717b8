#include <algorithm>
#include <queue>
#include <tuple>

#include "conav/bench.hpp"

namespace conav {

namespace {

constexpr std::uint64_t kCorruptionSalt = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kPlannerSalt = 0xA0761D6478BD642FULL;
constexpr std::uint64_t kOperatorSalt = 0xE7037ED1A0B428DBULL;

template <class E>
struct Names {
  E value;
  const char* name;
};

constexpr Names<WorldKind> kWorlds[] = {{WorldKind::Discrete, "discrete"}, {WorldKind::Continuous, "continuous"}};
constexpr Names<PolicyKind> kPolicies[] = {{PolicyKind::IgMcts, "ig-mcts"},
                                           {PolicyKind::InstructionFollowing, "instruction-following"},
                                           {PolicyKind::TeleopStream, "teleop-stream"}};
constexpr Names<HumanKind> kHumans[] = {{HumanKind::Synthetic, "synthetic"}, {HumanKind::Live, "live"}};

template <class E, std::size_t N>
std::string name_of(const Names<E> (&table)[N], E v) {
  for (const auto& n : table)
    if (n.value == v) return n.name;
  return "?";
}

template <class E, std::size_t N>
E value_of(const Names<E> (&table)[N], const std::string& s, const char* what) {
  for (const auto& n : table)
    if (s == n.name) return n.value;
  throw Error(ErrorCode::InvalidConfiguration, std::string("unknown ") + what + " '" + s + "'");
}

}  // namespace

std::string to_string(WorldKind w) { return name_of(kWorlds, w); }
std::string to_string(PolicyKind p) { return name_of(kPolicies, p); }
std::string to_string(HumanKind h) { return name_of(kHumans, h); }
WorldKind world_from_string(const std::string& s) { return value_of(kWorlds, s, "world"); }
PolicyKind policy_from_string(const std::string& s) { return value_of(kPolicies, s, "policy"); }
HumanKind human_from_string(const std::string& s) { return value_of(kHumans, s, "human"); }

void EpisodeConfig::validate() const {
  if (step_budget < 1) throw Error(ErrorCode::InvalidConfiguration, "step budget must be >= 1");
  if (!(mb_per_image > 0.0)) throw Error(ErrorCode::InvalidConfiguration, "mb_per_image must be > 0");
  if (maze_size < 5 || maze_size % 2 == 0) throw Error(ErrorCode::InvalidConfiguration, "maze size must be odd and >= 5");
  if (!(corruption >= 0.0 && corruption <= 1.0)) throw Error(ErrorCode::InvalidConfiguration, "corruption outside [0,1]");
  if (knowledge_radius < 0) throw Error(ErrorCode::InvalidConfiguration, "knowledge radius must be >= 0");
  if (max_guidance_retries < 1) throw Error(ErrorCode::InvalidConfiguration, "max_guidance_retries must be >= 1");
  synthetic_human.validate();
  mcts.validate();
  rewards.validate();
}

std::unique_ptr<PerceptionModel> make_model(const ModelSpec& spec, const SynthHumanConfig& human) {
  if (spec.kind == "synthetic") return std::make_unique<SynthPerception>(human);
  if (spec.kind == "glpf") return std::make_unique<GlpfPerception>(spec.glpf);
  if (spec.kind == "nhpm") {
    if (spec.path.empty()) throw Error(ErrorCode::InvalidConfiguration, "nhpm model needs a checkpoint path");
    return std::make_unique<NhpmPerception>(load_checkpoint(spec.path), spec.symmetrized);
  }
  throw Error(ErrorCode::InvalidConfiguration, "unknown model kind '" + spec.kind + "'");
}

Guidance operator_guidance(const BeliefMap& belief, Cell robot, const std::vector<Cell>& goals,
                           const Grid<std::uint8_t>* seen_wall) {
  if (goals.empty()) return {};
  OperatorState st{belief, {}, {}};
  Guidance g = suggest_path(st, robot, goals);
  if (!g.empty()) return g;

  constexpr int kWallCost = 25;
  const int h = belief.height(), w = belief.width();
  Grid<int> dist(h, w, std::numeric_limits<int>::max());
  Grid<int> from(h, w, -1);
  using Item = std::tuple<int, int, int>;  // cost, row, col
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  dist[robot] = 0;
  open.emplace(0, robot.row, robot.col);
  while (!open.empty()) {
    const auto [d, r, c] = open.top();
    open.pop();
    const Cell u{r, c};
    if (d != dist[u]) continue;
    for (const Direction dir : kDirections) {
      const Cell v = step(u, dir);
      if (!belief.labels.in_bounds(v) || belief.labels.on_border(v)) continue;
      if (seen_wall != nullptr && (*seen_wall)[v]) continue;
      const int nd = d + (belief.is_wall(v) ? kWallCost : 1);
      if (nd < dist[v]) {
        dist[v] = nd;
        from[v] = static_cast<int>(static_cast<std::size_t>(u.row) * w + u.col);
        open.emplace(nd, v.row, v.col);
      }
    }
  }
  Cell best = goals.front();
  for (const Cell goal : goals) {
    if (std::tie(dist[goal], goal.row, goal.col) < std::tie(dist[best], best.row, best.col)) best = goal;
  }
  if (dist[best] == std::numeric_limits<int>::max()) return {};
  std::vector<Cell> path{best};
  while (path.back() != robot) {
    const int i = from[path.back()];
    path.push_back({i / w, i % w});
  }
  std::reverse(path.begin(), path.end());
  return {path, 0};
}

Episode::Episode(const EpisodeConfig& config, const PerceptionModel* model)
    : Episode(config, model, generate_maze(config.seed, config.maze_size)) {}

Episode::Episode(const EpisodeConfig& config, const PerceptionModel* model, GridMaze maze)
    : config_(config), model_(model), maze_(std::move(maze)), planner_rng_(config.seed ^ kPlannerSalt) {
  config_.validate();
  if (config_.world != WorldKind::Discrete) {
    throw Error(ErrorCode::InvalidConfiguration, "the discrete episode runner needs world = discrete");
  }
  if (config_.policy == PolicyKind::IgMcts && model_ == nullptr) {
    throw Error(ErrorCode::InvalidArgument, "ig-mcts needs a perception model");
  }
  Rng corrupt(config_.seed ^ kCorruptionSalt);
  human_map_ = corrupt_belief(maze_, config_.corruption, corrupt);
  pose_ = {maze_.start, Direction::North};
  knowledge_ = reveal(KnowledgeGrid(maze_.height(), maze_.width(), config_.knowledge_radius), pose_, maze_);
  visited_ = Grid<std::uint8_t>(maze_.height(), maze_.width(), 0);
  visited_[pose_.cell] = 1;
  since_comm_ = {pose_.cell};
  for (const Cell g : maze_.goals)
    if (g != pose_.cell) unclaimed_.push_back(g);
  metrics_.goals_total = static_cast<int>(maze_.goals.size());
  metrics_.goals_claimed = metrics_.goals_total - static_cast<int>(unclaimed_.size());
  if (unclaimed_.empty()) finish(true);
}

std::vector<Frame> Episode::take_frames() { return std::exchange(frames_, {}); }

void Episode::record(const std::string& kind, const std::string& detail) {
  metrics_.turns.push_back({turn_, metrics_.steps, kind, detail, pose_.cell});
}

void Episode::apply_map_edit(const EditMask& edit) {
  if (phase_ == Phase::Finished) throw Error(ErrorCode::SessionError, "episode is finished");
  human_map_ = apply_edit(human_map_, edit);
  inputs_.push_back({HumanInput::Kind::MapEdit, edit, {}, turn_});
}

void Episode::submit_guidance(Guidance g) {
  if (phase_ != Phase::AwaitingGuidance) throw Error(ErrorCode::ProtocolError, "not awaiting guidance");
  if (!g.empty()) {
    for (const Cell c : g.cells) {
      if (!maze_.cells.in_bounds(c)) throw Error(ErrorCode::InvalidArgument, "guidance leaves the map");
    }
    if (!is_connected_path(g.cells)) throw Error(ErrorCode::InvalidArgument, "guidance cells are not 4-adjacent");
    if (g.cells.front() != pose_.cell) throw Error(ErrorCode::InvalidArgument, "guidance must start at the robot");
  }
  g.issued_at = turn_;
  inputs_.push_back({HumanInput::Kind::Guidance, {}, g, turn_});
  guidance_ = std::move(g);
  if (config_.policy != PolicyKind::TeleopStream) ++metrics_.guidance_instances;
  record("guidance", std::to_string(guidance_.cells.size()));
  phase_ = Phase::RobotTurn;
}

void Episode::emit_frame(Direction camera, std::vector<Cell> path, bool streamed) {
  frames_.push_back({visible_cells(maze_, {pose_.cell, camera}, config_.camera), std::move(path), streamed});
}

void Episode::claim_if_goal() {
  const auto it = std::find(unclaimed_.begin(), unclaimed_.end(), pose_.cell);
  if (it == unclaimed_.end()) return;
  unclaimed_.erase(it);
  ++metrics_.goals_claimed;
}

void Episode::move(Direction d) {
  const Cell before = pose_.cell;
  pose_ = transition(maze_, pose_, d);
  ++metrics_.steps;
  since_comm_.push_back(pose_.cell);
  visited_[pose_.cell] = 1;
  knowledge_ = reveal(std::move(knowledge_), pose_, maze_);
  claim_if_goal();
  record("move", std::string(1, direction_letter(d)) + (pose_.cell == before ? "!" : ""));
  if (config_.policy != PolicyKind::IgMcts) emit_frame(pose_.heading, {before, pose_.cell}, true);
}

void Episode::finish(bool complete) {
  phase_ = Phase::Finished;
  metrics_.complete = complete;
  metrics_.mapping_accuracy = mapping_accuracy(human_map_, maze_);
  metrics_.communication_mb =
      config_.mb_per_image * (config_.policy == PolicyKind::IgMcts ? metrics_.images : metrics_.steps);
}

void Episode::check_budget() {
  if (unclaimed_.empty()) {
    finish(true);
  } else if (metrics_.steps >= config_.step_budget || turn_ >= 4 * config_.step_budget + 100) {
    finish(false);
  }
}

void Episode::robot_turn() {
  if (phase_ != Phase::RobotTurn) throw Error(ErrorCode::ProtocolError, "not the robot's turn");
  ++turn_;
  auto request_guidance = [&](const std::string& why, std::optional<Direction> look) {
    if (++blocked_requests_ > config_.max_guidance_retries) {
      finish(false);
      return;
    }
    if (look) emit_frame(*look, {pose_.cell}, true);
    record("blocked", why);
    phase_ = Phase::AwaitingGuidance;
  };

  switch (config_.policy) {
    case PolicyKind::IgMcts: {
      GridPlanningContext ctx;
      ctx.knowledge = &knowledge_;
      ctx.goals = unclaimed_;
      ctx.guidance = guidance_;
      ctx.history = since_comm_;
      ctx.belief = std::make_shared<const BeliefMap>(human_map_);
      ctx.episode_visited = visited_;
      ctx.model = model_;
      ctx.rewards = config_.rewards;
      ctx.camera = config_.camera;
      const Action a = plan_grid(ctx, config_.mcts, planner_rng_);
      if (a.is_move()) {
        move(a.direction);
      } else {
        ++metrics_.images;
        emit_frame(a.direction, since_comm_, false);
        record("communicate", std::string(1, direction_letter(a.direction)));
        since_comm_ = {pose_.cell};
        phase_ = Phase::AwaitingGuidance;
      }
      break;
    }
    case PolicyKind::InstructionFollowing: {
      const auto& z = guidance_.cells;
      const auto it = std::find(z.begin(), z.end(), pose_.cell);
      if (it == z.end() || it + 1 == z.end()) {
        request_guidance("end of guidance", std::nullopt);
        break;
      }
      const Cell next = *(it + 1);
      Direction d = Direction::North;
      for (const Direction dir : kDirections)
        if (step(pose_.cell, dir) == next) d = dir;
      if (knowledge_[next] == CellLabel::Wall) {
        request_guidance("wall ahead", d);
        break;
      }
      const Cell before = pose_.cell;
      move(d);
      if (pose_.cell == before) {
        request_guidance("bumped", d);
      } else {
        blocked_requests_ = 0;
      }
      break;
    }
    case PolicyKind::TeleopStream: {
      const auto& z = guidance_.cells;
      if (z.size() < 2) {
        request_guidance("no path", std::nullopt);
        break;
      }
      Direction d = Direction::North;
      for (const Direction dir : kDirections)
        if (step(pose_.cell, dir) == z[1]) d = dir;
      const Cell before = pose_.cell;
      move(d);
      if (pose_.cell != before) blocked_requests_ = 0;
      if (phase_ != Phase::Finished) phase_ = Phase::AwaitingGuidance;
      break;
    }
  }
  if (phase_ != Phase::Finished) check_budget();
}

SyntheticOperator::SyntheticOperator(const EpisodeConfig& config)
    : config_(config.synthetic_human), rng_(config.seed ^ kOperatorSalt) {}

void SyntheticOperator::respond(Episode& episode) {
  if (seen_wall_.size() == 0) seen_wall_ = Grid<std::uint8_t>(episode.maze().height(), episode.maze().width(), 0);
  for (const Frame& f : episode.take_frames()) {
    if (episode.phase() == Episode::Phase::Finished) break;
    for (std::size_t i = 0; i < f.observation.visible.size(); ++i) {
      seen_wall_[f.observation.visible[i]] = f.observation.labels[i] == CellLabel::Wall;
    }
    OperatorState st{episode.human_map(), {}, {}};
    st = synth_update(std::move(st), f.observation, f.path, config_, rng_);
    const EditMask edit = edit_between(episode.human_map(), st.belief);
    if (edit.count() > 0) episode.apply_map_edit(edit);
  }
  if (episode.phase() == Episode::Phase::AwaitingGuidance) {
    episode.submit_guidance(operator_guidance(episode.human_map(), episode.pose().cell, episode.unclaimed_goals(), &seen_wall_));
  }
}

EpisodeMetrics run_episode(const EpisodeConfig& config, const PerceptionModel* model) {
  std::unique_ptr<PerceptionModel> owned;
  if (model == nullptr && config.policy == PolicyKind::IgMcts) {
    owned = make_model(config.model, config.synthetic_human);
    model = owned.get();
  }
  Episode ep(config, model);
  SyntheticOperator op(config);
  while (ep.phase() != Episode::Phase::Finished) {
    op.respond(ep);
    if (ep.phase() == Episode::Phase::RobotTurn) ep.robot_turn();
  }
  return ep.metrics();
}

EpisodeMetrics replay_episode(const EpisodeConfig& config, const std::vector<HumanInput>& inputs,
                              const PerceptionModel* model, bool partial) {
  std::unique_ptr<PerceptionModel> owned;
  if (model == nullptr && config.policy == PolicyKind::IgMcts) {
    owned = make_model(config.model, config.synthetic_human);
    model = owned.get();
  }
  Episode ep(config, model);
  std::size_t next = 0;
  int turn = 0;
  while (ep.phase() != Episode::Phase::Finished) {
    ep.take_frames();
    while (next < inputs.size() && inputs[next].turn == turn && ep.phase() != Episode::Phase::Finished) {
      const HumanInput& in = inputs[next++];
      if (in.kind == HumanInput::Kind::MapEdit) {
        ep.apply_map_edit(in.edit);
      } else {
        ep.submit_guidance(in.guidance);
      }
    }
    if (ep.phase() == Episode::Phase::AwaitingGuidance) {
      if (partial) break;
      throw Error(ErrorCode::SessionError, "recorded inputs end while the robot awaits guidance");
    }
    if (ep.phase() == Episode::Phase::RobotTurn) {
      ep.robot_turn();
      ++turn;
    }
  }
  return ep.metrics();
}

}  // namespace conav
