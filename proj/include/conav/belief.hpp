#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "conav/common.hpp"
#include "conav/grid_world.hpp"

namespace conav {

/// The operator's binary wall/free map. For discrete mazes the border is
/// fixed to Wall and never edited; continuous rasters have no fixed border.
struct BeliefMap {
  LabelGrid labels;
  bool fixed_border = true;

  BeliefMap() = default;
  explicit BeliefMap(LabelGrid l, bool fixed = true) : labels(std::move(l)), fixed_border(fixed) {}

  static BeliefMap from_maze(const GridMaze& maze) { return BeliefMap(maze.cells); }

  int height() const { return labels.height(); }
  int width() const { return labels.width(); }
  bool is_wall(Cell c) const { return labels[c] == CellLabel::Wall; }
  /// Cells the operator may edit at all.
  bool editable(Cell c) const { return !(fixed_border && labels.on_border(c)); }

  friend bool operator==(const BeliefMap&, const BeliefMap&) = default;
};

/// Per-cell probability that the operator adds / removes a wall.
struct EditProbabilities {
  Grid<double> add;
  Grid<double> remove;

  EditProbabilities() = default;
  EditProbabilities(int height, int width) : add(height, width, 0.0), remove(height, width, 0.0) {}

  int height() const { return add.height(); }
  int width() const { return add.width(); }
};

struct EditMask {
  Grid<std::uint8_t> add;
  Grid<std::uint8_t> remove;

  EditMask() = default;
  EditMask(int height, int width) : add(height, width, 0), remove(height, width, 0) {}

  std::size_t count() const;
  friend bool operator==(const EditMask&, const EditMask&) = default;
};

/// Grid-based logistic psychometric function parameters. The stimulus decay
/// and the logistic midpoint are separate parameters.
struct GlpfParams {
  double guess = 0.01;     ///< rho
  double lapse = 0.05;     ///< lambda
  double slope = 8.0;      ///< beta
  double midpoint = 0.5;   ///< alpha_mid
  double decay = 0.35;     ///< kappa, per cell of distance

  bool valid() const;
  void validate() const;
};

/// e^(-decay * distance).
double stimulus(double distance, double decay);

double glpf_probability(double intensity, const GlpfParams& params);

/// Zeroes p_add on believed walls, p_remove on believed free cells and both
/// on non-editable cells.
void apply_mask_rule(EditProbabilities& probs, const BeliefMap& belief);
bool satisfies_mask_rule(const EditProbabilities& probs, const BeliefMap& belief);

EditProbabilities glpf_predict(const BeliefMap& belief, const Observation& obs,
                               const GlpfParams& params);

/// E[|x' - x|_1] under independent per-cell edits: the sum of both masks.
double expected_info_gain(const EditProbabilities& probs);

EditMask sample_edit(const EditProbabilities& probs, Rng& rng);

BeliefMap apply_edit(BeliefMap belief, const EditMask& edit);

/// The edit that turns `before` into `after`.
EditMask edit_between(const BeliefMap& before, const BeliefMap& after);

/// Fraction of interior cells whose belief label equals the maze.
double mapping_accuracy(const BeliefMap& belief, const GridMaze& maze);

/// Same text format as mazes, without start or goal markers.
std::string to_text(const BeliefMap& belief);
BeliefMap belief_from_text(std::string_view text);

}  // namespace conav
