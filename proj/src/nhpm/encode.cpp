#include <cmath>
#include <numbers>

#include "conav/nhpm.hpp"

namespace conav {

InputTensor encode(const Segment& segment) {
  segment.validate();
  const BeliefMap& b = segment.before;
  InputTensor t(b.height(), b.width());
  for (int r = 0; r < b.height(); ++r)
    for (int c = 0; c < b.width(); ++c) t.at(0, r, c) = b.is_wall({r, c}) ? 1.0f : 0.0f;
  for (const Cell p : segment.path) t.at(1, p.row, p.col) = 1.0f;
  const Observation& o = segment.observation;
  for (std::size_t i = 0; i < o.visible.size(); ++i) {
    const Cell v = o.visible[i];
    t.at(2, v.row, v.col) = 1.0f;
    t.at(3, v.row, v.col) = o.labels[i] == CellLabel::Wall ? 1.0f : 0.0f;
  }
  return t;
}

DecodedObservation decode_observation(const InputTensor& input) {
  DecodedObservation out;
  for (int r = 0; r < input.height; ++r)
    for (int c = 0; c < input.width; ++c) {
      if (input.at(2, r, c) < 0.5f) continue;
      out.visible.push_back({r, c});
      out.labels.push_back(input.at(3, r, c) >= 0.5f ? CellLabel::Wall : CellLabel::Free);
    }
  return out;
}

BeliefMap decode_belief(const InputTensor& input, bool fixed_border) {
  LabelGrid labels(input.height, input.width, CellLabel::Free);
  for (int r = 0; r < input.height; ++r)
    for (int c = 0; c < input.width; ++c)
      if (input.at(0, r, c) >= 0.5f) labels.at(r, c) = CellLabel::Wall;
  return BeliefMap(std::move(labels), fixed_border);
}

Cell apply(Dihedral g, Cell p, int n) {
  const int m = n - 1;
  switch (g) {
    case Dihedral::Identity: return p;
    case Dihedral::Rot90: return {p.col, m - p.row};
    case Dihedral::Rot180: return {m - p.row, m - p.col};
    case Dihedral::Rot270: return {m - p.col, p.row};
    case Dihedral::FlipCols: return {p.row, m - p.col};
    case Dihedral::FlipRows: return {m - p.row, p.col};
    case Dihedral::Transpose: return {p.col, p.row};
    case Dihedral::AntiTranspose: return {m - p.col, m - p.row};
  }
  return p;
}

Dihedral compose(Dihedral outer, Dihedral inner) {
  // Probing two asymmetric cells of a 3x3 grid identifies the element.
  const Cell a{0, 1}, b{0, 0};
  for (const Dihedral h : kDihedrals) {
    if (apply(h, a, 3) == apply(outer, apply(inner, a, 3), 3) &&
        apply(h, b, 3) == apply(outer, apply(inner, b, 3), 3)) {
      return h;
    }
  }
  return Dihedral::Identity;
}

Dihedral inverse(Dihedral g) {
  for (const Dihedral h : kDihedrals)
    if (compose(h, g) == Dihedral::Identity) return h;
  return Dihedral::Identity;
}

std::pair<InputTensor, EditMask> augment_discrete(const InputTensor& input, const EditMask& label,
                                                  Dihedral g) {
  if (input.height != input.width || label.add.height() != input.height ||
      label.add.width() != input.width) {
    throw Error(ErrorCode::InvalidArgument, "dihedral augmentation needs matching square grids");
  }
  const int n = input.height;
  InputTensor out(n, n);
  EditMask out_label(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const Cell d = apply(g, {r, c}, n);
      for (int ch = 0; ch < InputTensor::kChannels; ++ch) out.at(ch, d.row, d.col) = input.at(ch, r, c);
      out_label.add[d] = label.add.at(r, c);
      out_label.remove[d] = label.remove.at(r, c);
    }
  return {std::move(out), std::move(out_label)};
}

ContinuousAugment sample_continuous_augment(Rng& rng) {
  ContinuousAugment a;
  a.side = 100 + rng.below(51);
  a.angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  a.flip_rows = rng.bernoulli(0.5);
  a.flip_cols = rng.bernoulli(0.5);
  return a;
}

std::pair<InputTensor, EditMask> augment_continuous(const Segment& segment, const ContinuousAugment& aug) {
  if (aug.side < 1 || aug.side > kContinuousResolution) {
    throw Error(ErrorCode::InvalidArgument, "augmentation side out of range");
  }
  const InputTensor src = encode(segment);
  const EditMask label = segment.label();
  const int n = src.height;
  const int m = src.width;
  const int res = kContinuousResolution;
  InputTensor out(res, res);
  EditMask out_label(res, res);
  const double centre = res / 2.0;
  const double cos_a = std::cos(aug.angle);
  const double sin_a = std::sin(aug.angle);
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < res; ++j) {
      // Inverse-rotate the canvas pixel centre into the upscaled square.
      const double y = i + 0.5 - centre;
      const double x = j + 0.5 - centre;
      const double sy = cos_a * y - sin_a * x;
      const double sx = sin_a * y + cos_a * x;
      const double u = sy + aug.side / 2.0;
      const double v = sx + aug.side / 2.0;
      if (u < 0.0 || v < 0.0 || u >= aug.side || v >= aug.side) continue;
      int r = std::min(n - 1, static_cast<int>(std::floor(u * n / aug.side)));
      int c = std::min(m - 1, static_cast<int>(std::floor(v * m / aug.side)));
      if (aug.flip_rows) r = n - 1 - r;
      if (aug.flip_cols) c = m - 1 - c;
      for (int ch = 0; ch < InputTensor::kChannels; ++ch) out.at(ch, i, j) = src.at(ch, r, c);
      out_label.add.at(i, j) = label.add.at(r, c);
      out_label.remove.at(i, j) = label.remove.at(r, c);
    }
  return {std::move(out), std::move(out_label)};
}

std::pair<InputTensor, EditMask> augment_continuous(const Segment& segment, Rng& rng) {
  return augment_continuous(segment, sample_continuous_augment(rng));
}

}  // namespace conav
