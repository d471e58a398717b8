#include "conav/belief.hpp"

#include <cmath>
#include <sstream>

namespace conav {

std::size_t EditMask::count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < add.size(); ++i) n += add.data()[i] + remove.data()[i];
  return n;
}

bool GlpfParams::valid() const {
  return guess >= 0.0 && guess <= 0.5 && lapse >= 0.0 && lapse <= 0.5 && guess + lapse < 1.0 &&
         slope > 0.0 && decay > 0.0 && std::isfinite(midpoint);
}

void GlpfParams::validate() const {
  if (!valid()) throw Error(ErrorCode::InvalidArgument, "GLPF parameters out of range");
}

double stimulus(double distance, double decay) {
  if (!(distance >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative stimulus distance");
  return std::exp(-decay * distance);
}

double glpf_probability(double intensity, const GlpfParams& params) {
  params.validate();
  const double z = params.slope * (intensity - params.midpoint);
  return params.guess + (1.0 - params.guess - params.lapse) / (1.0 + std::exp(-z));
}

void apply_mask_rule(EditProbabilities& probs, const BeliefMap& belief) {
  for (std::size_t i = 0; i < probs.add.size(); ++i) {
    const Cell c = probs.add.cell_at(i);
    if (!belief.editable(c)) {
      probs.add.data()[i] = 0.0;
      probs.remove.data()[i] = 0.0;
    } else if (belief.is_wall(c)) {
      probs.add.data()[i] = 0.0;
    } else {
      probs.remove.data()[i] = 0.0;
    }
  }
}

bool satisfies_mask_rule(const EditProbabilities& probs, const BeliefMap& belief) {
  for (std::size_t i = 0; i < probs.add.size(); ++i) {
    const Cell c = probs.add.cell_at(i);
    const double a = probs.add.data()[i];
    const double r = probs.remove.data()[i];
    if (!std::isfinite(a) || !std::isfinite(r)) return false;
    if (!belief.editable(c) && (a != 0.0 || r != 0.0)) return false;
    if (belief.is_wall(c) ? a != 0.0 : r != 0.0) return false;
  }
  return true;
}

EditProbabilities glpf_predict(const BeliefMap& belief, const Observation& obs,
                               const GlpfParams& params) {
  params.validate();
  EditProbabilities out(belief.height(), belief.width());
  for (std::size_t i = 0; i < obs.visible.size(); ++i) {
    const Cell c = obs.visible[i];
    const bool believed_wall = belief.is_wall(c);
    const bool truly_wall = obs.labels[i] == CellLabel::Wall;
    double p = params.guess;
    if (believed_wall != truly_wall) {
      const double d = std::hypot(c.row - obs.camera.cell.row, c.col - obs.camera.cell.col);
      p = glpf_probability(stimulus(d, params.decay), params);
    }
    (believed_wall ? out.remove : out.add)[c] = p;
  }
  apply_mask_rule(out, belief);
  return out;
}

double expected_info_gain(const EditProbabilities& probs) {
  double total = 0.0;
  for (const double p : probs.add.data()) total += p;
  for (const double p : probs.remove.data()) total += p;
  return total;
}

EditMask sample_edit(const EditProbabilities& probs, Rng& rng) {
  EditMask mask(probs.height(), probs.width());
  for (std::size_t i = 0; i < probs.add.size(); ++i) {
    const double a = probs.add.data()[i];
    const double r = probs.remove.data()[i];
    if (a > 0.0 && r > 0.0) {
      throw Error(ErrorCode::InvalidArgument, "edit probabilities violate the mask rule");
    }
    if (a <= 0.0 && r <= 0.0) continue;
    const double u = rng.uniform();
    if (u < a) mask.add.data()[i] = 1;
    if (u < r) mask.remove.data()[i] = 1;
  }
  return mask;
}

BeliefMap apply_edit(BeliefMap belief, const EditMask& edit) {
  if (!belief.labels.same_shape(edit.add)) {
    throw Error(ErrorCode::InvalidEdit, "edit shape does not match belief");
  }
  for (std::size_t i = 0; i < edit.add.size(); ++i) {
    const bool add = edit.add.data()[i] != 0;
    const bool remove = edit.remove.data()[i] != 0;
    if (!add && !remove) continue;
    const Cell c = edit.add.cell_at(i);
    if (add && remove) throw Error(ErrorCode::InvalidEdit, "cell both added and removed");
    if (!belief.editable(c)) throw Error(ErrorCode::InvalidEdit, "edit touches the fixed border");
    if (add == belief.is_wall(c)) throw Error(ErrorCode::InvalidEdit, "edit violates the mask rule");
    belief.labels[c] = add ? CellLabel::Wall : CellLabel::Free;
  }
  return belief;
}

EditMask edit_between(const BeliefMap& before, const BeliefMap& after) {
  EditMask mask(before.height(), before.width());
  for (std::size_t i = 0; i < mask.add.size(); ++i) {
    const CellLabel a = before.labels.data()[i];
    const CellLabel b = after.labels.data()[i];
    if (a == b) continue;
    (b == CellLabel::Wall ? mask.add : mask.remove).data()[i] = 1;
  }
  return mask;
}

double mapping_accuracy(const BeliefMap& belief, const GridMaze& maze) {
  if (!belief.labels.same_shape(maze.cells)) {
    throw Error(ErrorCode::InvalidArgument, "belief and maze dimensions differ");
  }
  std::size_t correct = 0;
  std::size_t total = 0;
  for (int r = 1; r < maze.height() - 1; ++r) {
    for (int c = 1; c < maze.width() - 1; ++c) {
      ++total;
      correct += belief.labels.at(r, c) == maze.cells.at(r, c);
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(total);
}

std::string to_text(const BeliefMap& belief) {
  std::string out;
  for (int r = 0; r < belief.height(); ++r) {
    for (int c = 0; c < belief.width(); ++c) out.push_back(belief.is_wall({r, c}) ? '#' : '.');
    out.push_back('\n');
  }
  return out;
}

BeliefMap belief_from_text(std::string_view text) {
  std::vector<std::string> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) rows.push_back(line);
  }
  if (rows.empty()) throw Error(ErrorCode::IoError, "empty belief text");
  LabelGrid labels(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()), CellLabel::Wall);
  for (int r = 0; r < labels.height(); ++r) {
    if (static_cast<int>(rows[r].size()) != labels.width()) {
      throw Error(ErrorCode::IoError, "ragged belief row " + std::to_string(r));
    }
    for (int c = 0; c < labels.width(); ++c) {
      const char ch = rows[r][c];
      if (ch != '#' && ch != '.') throw Error(ErrorCode::IoError, "unexpected belief character");
      labels.at(r, c) = ch == '#' ? CellLabel::Wall : CellLabel::Free;
    }
  }
  return BeliefMap(std::move(labels));
}

}  // namespace conav
