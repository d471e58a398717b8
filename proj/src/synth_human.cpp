#include "conav/synth_human.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>

#include "conav/detail/bfs.hpp"

namespace conav {

void Segment::validate() const {
  if (!before.labels.same_shape(after.labels)) {
    throw Error(ErrorCode::InvalidSegment, "belief shapes differ");
  }
  if (path.empty()) throw Error(ErrorCode::InvalidSegment, "empty path");
  if (path.back() != observation.camera.cell) {
    throw Error(ErrorCode::InvalidSegment, "path does not end at the camera cell");
  }
  if (observation.visible.size() != observation.labels.size()) {
    throw Error(ErrorCode::InvalidSegment, "observation labels are not parallel to cells");
  }
  for (const Cell c : path) {
    if (!before.labels.in_bounds(c)) throw Error(ErrorCode::InvalidSegment, "path leaves the map");
  }
  for (const Cell c : observation.visible) {
    if (!before.labels.in_bounds(c)) throw Error(ErrorCode::InvalidSegment, "visible cell off map");
  }
}

void SynthHumanConfig::validate() const {
  if (!(base_rate > 0.0 && base_rate <= 1.0) || !(decay > 0.0) || !(alignment_bonus >= 0.0) ||
      !(false_edit_rate >= 0.0 && false_edit_rate < 0.05)) {
    throw Error(ErrorCode::InvalidConfiguration, "synthetic human parameters out of range");
  }
}

bool Guidance::contains(Cell c) const {
  return std::find(cells.begin(), cells.end(), c) != cells.end();
}

bool is_connected_path(const std::vector<Cell>& cells) {
  for (std::size_t i = 1; i < cells.size(); ++i) {
    if (std::abs(cells[i].row - cells[i - 1].row) + std::abs(cells[i].col - cells[i - 1].col) != 1) {
      return false;
    }
  }
  return true;
}

namespace {

bool aligned_with_wall(const BeliefMap& belief, Cell c) {
  for (const Direction d : kDirections) {
    const Cell n = step(c, d);
    if (belief.labels.in_bounds(n) && belief.is_wall(n)) return true;
  }
  return false;
}

}  // namespace

EditProbabilities synth_edit_probs(const BeliefMap& belief, const Observation& obs,
                                   const SynthHumanConfig& config) {
  config.validate();
  EditProbabilities out(belief.height(), belief.width());
  for (std::size_t i = 0; i < obs.visible.size(); ++i) {
    const Cell c = obs.visible[i];
    const bool believed_wall = belief.is_wall(c);
    const bool truly_wall = obs.labels[i] == CellLabel::Wall;
    double p = config.false_edit_rate;
    if (believed_wall != truly_wall) {
      const double d = std::hypot(c.row - obs.camera.cell.row, c.col - obs.camera.cell.col);
      const double bonus = aligned_with_wall(belief, c) ? 1.0 + config.alignment_bonus : 1.0;
      p = std::clamp(config.base_rate * std::exp(-config.decay * d) * bonus, 0.0, 1.0);
    }
    (believed_wall ? out.remove : out.add)[c] = p;
  }
  apply_mask_rule(out, belief);
  return out;
}

EditProbabilities synth_true_probs(const BeliefMap& belief, const std::vector<Cell>& path,
                                   const Observation& obs, const SynthHumanConfig& config) {
  EditProbabilities probs = synth_edit_probs(belief, obs, config);
  for (const Cell c : path) {
    if (belief.is_wall(c) && belief.editable(c)) probs.remove[c] = 1.0;
  }
  return probs;
}

OperatorState synth_update(OperatorState state, const Observation& obs,
                           const std::vector<Cell>& path, const SynthHumanConfig& config, Rng& rng) {
  EditMask edit = sample_edit(synth_edit_probs(state.belief, obs, config), rng);
  // The operator saw the robot drive through these cells.
  for (const Cell c : path) {
    if (state.belief.is_wall(c) && state.belief.editable(c)) edit.remove[c] = 1;
  }
  state.belief = apply_edit(std::move(state.belief), edit);
  return state;
}

Guidance suggest_path(const OperatorState& state, Cell robot, const std::vector<Cell>& goals) {
  const BeliefMap& belief = state.belief;
  auto passable = [&](Cell c) { return c == robot || !belief.is_wall(c); };
  auto unclaimed = [&](Cell g) {
    return std::find(state.claimed_goals.begin(), state.claimed_goals.end(), g) ==
           state.claimed_goals.end();
  };

  // Hop distances from the robot over believed-free cells.
  Grid<int> dist(belief.height(), belief.width(), -1);
  std::deque<Cell> frontier{robot};
  dist[robot] = 0;
  while (!frontier.empty()) {
    const Cell c = frontier.front();
    frontier.pop_front();
    for (const Direction d : kDirections) {
      const Cell n = step(c, d);
      if (dist.in_bounds(n) && dist[n] < 0 && passable(n)) {
        dist[n] = dist[c] + 1;
        frontier.push_back(n);
      }
    }
  }
  std::optional<Cell> target;
  for (const Cell g : goals) {
    if (!unclaimed(g) || !dist.in_bounds(g) || dist[g] < 0) continue;
    if (!target || dist[g] < dist[*target] || (dist[g] == dist[*target] && g < *target)) target = g;
  }
  Guidance out;
  if (!target) return out;
  out.cells = bfs_path(belief.height(), belief.width(), robot, *target, passable);
  return out;
}

double bayes_floor(const std::vector<Segment>& segments, const SynthHumanConfig& config) {
  double total = 0.0;
  std::size_t cells = 0;
  auto entropy = [](double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -(p * std::log(p) + (1.0 - p) * std::log(1.0 - p));
  };
  for (const Segment& s : segments) {
    const EditProbabilities p = synth_true_probs(s.before, s.path, s.observation, config);
    for (std::size_t i = 0; i < p.add.size(); ++i) {
      total += entropy(p.add.data()[i]) + entropy(p.remove.data()[i]);
    }
    cells += 2 * p.add.size();
  }
  return cells == 0 ? 0.0 : total / static_cast<double>(cells);
}

BeliefMap corrupt_belief(const GridMaze& maze, double fraction, Rng& rng) {
  BeliefMap belief = BeliefMap::from_maze(maze);
  std::vector<Cell> candidates;
  for (int r = 1; r < maze.height() - 1; ++r) {
    for (int c = 1; c < maze.width() - 1; ++c) {
      const Cell cell{r, c};
      if (cell == maze.start) continue;
      if (std::find(maze.goals.begin(), maze.goals.end(), cell) != maze.goals.end()) continue;
      candidates.push_back(cell);
    }
  }
  const int interior = (maze.height() - 2) * (maze.width() - 2);
  const auto flips = std::min(candidates.size(),
                              static_cast<std::size_t>(std::lround(fraction * interior)));
  rng.shuffle(candidates);
  for (std::size_t i = 0; i < flips; ++i) {
    CellLabel& l = belief.labels[candidates[i]];
    l = l == CellLabel::Wall ? CellLabel::Free : CellLabel::Wall;
  }
  return belief;
}

namespace {

// Picks the next mapping-task target: unvisited goals first, then a free
// cell drawn proportionally to belief/truth mismatches in its 3x3 window.
Cell next_target(const GridMaze& maze, const BeliefMap& belief, Cell robot,
                 std::vector<Cell>& pending_goals, Rng& rng) {
  while (!pending_goals.empty()) {
    const Cell g = pending_goals.front();
    pending_goals.erase(pending_goals.begin());
    if (g != robot) return g;
  }
  std::vector<Cell> cells;
  std::vector<double> weights;
  double total = 0.0;
  for (int r = 1; r < maze.height() - 1; ++r) {
    for (int c = 1; c < maze.width() - 1; ++c) {
      const Cell cell{r, c};
      if (!maze.is_free(cell) || cell == robot) continue;
      int mismatch = 0;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const Cell n{r + dr, c + dc};
          mismatch += belief.labels[n] != maze.cells[n];
        }
      cells.push_back(cell);
      weights.push_back(mismatch);
      total += mismatch;
    }
  }
  if (total == 0.0) return cells[static_cast<std::size_t>(rng.below(static_cast<int>(cells.size())))];
  double u = rng.uniform() * total;
  std::size_t pick = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (weights[i] == 0.0) continue;
    pick = i;
    u -= weights[i];
    if (u < 0.0) break;
  }
  return cells[pick];
}

}  // namespace

std::vector<Segment> generate_dataset(int n_mazes, const DatasetConfig& config,
                                      std::uint64_t master_seed,
                                      std::vector<CommunicationEvent>* log) {
  if (n_mazes < 1) throw Error(ErrorCode::InvalidArgument, "n_mazes must be >= 1");
  config.human.validate();
  std::vector<Segment> out;
  for (int m = 0; m < n_mazes; ++m) {
    const std::uint64_t seed = master_seed + static_cast<std::uint64_t>(m);
    const GridMaze maze = generate_maze(seed, config.maze_size);
    Rng rng(seed ^ 0xD1B54A32D192ED03ULL);
    OperatorState human{corrupt_belief(maze, config.corruption, rng), {}, {}};
    std::vector<Cell> pending_goals = maze.goals;
    Cell robot = maze.start;
    for (int event = 0; event < config.max_communications; ++event) {
      if (mapping_accuracy(human.belief, maze) >= config.stop_accuracy) break;
      const Cell target = next_target(maze, human.belief, robot, pending_goals, rng);
      std::vector<Cell> path =
          bfs_path(maze.height(), maze.width(), robot, target, [&](Cell c) { return maze.is_free(c); });
      if (path.empty()) path = {robot};
      robot = path.back();
      const auto heading = kDirections[static_cast<std::size_t>(rng.below(4))];
      Segment seg;
      seg.before = human.belief;
      seg.path = path;
      seg.observation = visible_cells(maze, {robot, heading}, config.camera);
      const double acc_before = mapping_accuracy(human.belief, maze);
      human = synth_update(std::move(human), seg.observation, path, config.human, rng);
      seg.after = human.belief;
      if (log) {
        log->push_back({m, seed, event, seg.observation.camera, static_cast<int>(path.size()),
                        static_cast<int>(seg.observation.visible.size()),
                        static_cast<int>(seg.label().count()), acc_before,
                        mapping_accuracy(human.belief, maze)});
      }
      out.push_back(std::move(seg));
    }
  }
  return out;
}

}  // namespace conav
