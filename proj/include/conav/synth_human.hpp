#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "conav/belief.hpp"
#include "conav/grid_world.hpp"
#include "conav/segment.hpp"

namespace conav {

/// Synthetic operator with known per-cell edit statistics.
struct SynthHumanConfig {
  double base_rate = 0.9;        ///< b
  double decay = 0.35;           ///< kappa_h, per cell of distance
  double alignment_bonus = 0.5;  ///< a, applied when 4-adjacent to a believed wall
  double false_edit_rate = 0.01; ///< f, on visible cells that already agree

  void validate() const;
};

/// A human-suggested trajectory of 4-adjacent cells.
struct Guidance {
  std::vector<Cell> cells;
  int issued_at = 0;

  bool empty() const { return cells.empty(); }
  bool contains(Cell c) const;
};

bool is_connected_path(const std::vector<Cell>& cells);

struct OperatorState {
  BeliefMap belief;
  std::vector<Cell> claimed_goals;
  Guidance guidance;
};

EditProbabilities synth_edit_probs(const BeliefMap& belief, const Observation& obs,
                                   const SynthHumanConfig& config);

/// The generator's exact conditional edit probabilities for a segment:
/// synth_edit_probs plus certain removal of believed walls on the path.
EditProbabilities synth_true_probs(const BeliefMap& belief, const std::vector<Cell>& path,
                                   const Observation& obs, const SynthHumanConfig& config);

OperatorState synth_update(OperatorState state, const Observation& obs,
                           const std::vector<Cell>& path, const SynthHumanConfig& config, Rng& rng);

/// Shortest believed-free path from the robot to the nearest unclaimed goal.
Guidance suggest_path(const OperatorState& state, Cell robot, const std::vector<Cell>& goals);

/// Mean binary entropy (nats) of the generator's true probabilities over all
/// cells and both channels: the Bayes floor for cross-entropy on its data.
double bayes_floor(const std::vector<Segment>& segments, const SynthHumanConfig& config);

struct DatasetConfig {
  int maze_size = 13;
  double corruption = 0.15;
  double stop_accuracy = 0.95;
  int max_communications = 40;
  SynthHumanConfig human;
  VisibilityConfig camera;
};

/// One record of the human-readable episode log.
struct CommunicationEvent {
  int maze_index = 0;
  std::uint64_t maze_seed = 0;
  int event = 0;
  RobotPose camera;
  int path_length = 0;
  int visible = 0;
  int edits = 0;
  double accuracy_before = 0.0;
  double accuracy_after = 0.0;
};

/// Initial operator map: the maze with a fraction of interior cells flipped.
/// Start and goal cells are never flipped.
BeliefMap corrupt_belief(const GridMaze& maze, double fraction, Rng& rng);

/// Mapping-task episodes on `n_mazes` mazes; maze i uses seed master_seed + i
/// for both layout and its own random stream.
std::vector<Segment> generate_dataset(int n_mazes, const DatasetConfig& config,
                                      std::uint64_t master_seed,
                                      std::vector<CommunicationEvent>* log = nullptr);

}  // namespace conav
