#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "conav/continuous.hpp"

namespace conav {

Cell nearest_pixel(Point p) {
  return {static_cast<int>(std::floor(p.row + 0.5)), static_cast<int>(std::floor(p.col + 0.5))};
}

double distance(Point a, Point b) { return std::hypot(a.row - b.row, a.col - b.col); }

std::vector<Cell> segment_pixels(Point a, Point b) {
  std::vector<Cell> out;
  const double len = distance(a, b);
  auto push = [&](Cell c) {
    if (out.empty() || out.back() != c) out.push_back(c);
  };
  for (int i = 0; 0.25 * i < len; ++i) {
    const double t = 0.25 * i / len;
    push(nearest_pixel({a.row + (b.row - a.row) * t, a.col + (b.col - a.col) * t}));
  }
  push(nearest_pixel(b));
  return out;
}

LabelGrid TerrainMap::labels() const {
  LabelGrid out(traversable.height(), traversable.width(), CellLabel::Wall);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (traversable.data()[i]) out.data()[i] = CellLabel::Free;
  return out;
}

double TerrainMap::traversable_fraction() const {
  std::size_t n = 0;
  for (const auto t : traversable.data()) n += t != 0;
  return static_cast<double>(n) / static_cast<double>(traversable.size());
}

namespace {

Grid<double> box_blur(const Grid<double>& in, int radius) {
  Grid<double> out(in.height(), in.width(), 0.0);
  for (int r = 0; r < in.height(); ++r) {
    for (int c = 0; c < in.width(); ++c) {
      double sum = 0.0;
      int n = 0;
      for (int dr = -radius; dr <= radius; ++dr) {
        for (int dc = -radius; dc <= radius; ++dc) {
          const Cell p{r + dr, c + dc};
          if (!in.in_bounds(p)) continue;
          sum += in[p];
          ++n;
        }
      }
      out.at(r, c) = sum / n;
    }
  }
  return out;
}

void force_traversable(TerrainMap& t, Cell centre, int radius) {
  for (int dr = -radius; dr <= radius; ++dr) {
    for (int dc = -radius; dc <= radius; ++dc) {
      const Cell p{centre.row + dr, centre.col + dc};
      if (!t.height.in_bounds(p) || dr * dr + dc * dc > radius * radius) continue;
      t.height[p] = std::min(t.height[p], t.water_level - 1e-6);
      t.traversable[p] = 1;
    }
  }
}

}  // namespace

TerrainMap generate_terrain(std::uint64_t seed) {
  Rng rng(seed);
  const int n = kTerrainSize;
  Grid<double> h(n, n, 0.0);
  for (int k = 0; k < 8; ++k) {
    const double amplitude = rng.uniform(0.5, 1.0);
    const double cycles = rng.uniform(1.0, 3.5);
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double kr = 2.0 * std::numbers::pi * cycles * std::sin(theta) / n;
    const double kc = 2.0 * std::numbers::pi * cycles * std::cos(theta) / n;
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) h.at(r, c) += amplitude * std::sin(kr * r + kc * c + phase);
  }
  h = box_blur(box_blur(h, 2), 2);

  TerrainMap t;
  std::vector<double> sorted = h.data();
  std::sort(sorted.begin(), sorted.end());
  t.water_level = sorted[static_cast<std::size_t>(0.6 * static_cast<double>(sorted.size()))];
  t.height = std::move(h);
  t.traversable = Grid<std::uint8_t>(n, n, 0);
  for (std::size_t i = 0; i < t.height.size(); ++i) t.traversable.data()[i] = t.height.data()[i] < t.water_level;
  t.start = {n / 2, 10};
  t.goal = {n / 2, n - 11};
  force_traversable(t, t.start, 3);
  force_traversable(t, t.goal, 3);
  return t;
}

TerrainMap terrain_from_mask(const Grid<std::uint8_t>& traversable, Cell start, Cell goal) {
  if (!traversable.in_bounds(start) || !traversable.in_bounds(goal) || !traversable[start] || !traversable[goal]) {
    throw Error(ErrorCode::InvalidPose, "start and goal must be traversable");
  }
  TerrainMap t;
  t.traversable = traversable;
  t.height = Grid<double>(traversable.height(), traversable.width(), 1.0);
  for (std::size_t i = 0; i < t.height.size(); ++i)
    if (traversable.data()[i]) t.height.data()[i] = 0.0;
  t.water_level = 0.5;
  t.start = start;
  t.goal = goal;
  return t;
}

BeliefMap perturbed_belief(const TerrainMap& terrain, int discs, int radius, Rng& rng) {
  if (discs < 0 || radius < 0) throw Error(ErrorCode::InvalidArgument, "disc count and radius must be >= 0");
  BeliefMap b(terrain.labels(), false);
  const int h = terrain.traversable.height(), w = terrain.traversable.width();
  const double keep_out = 2.0 * radius + 1.0;
  for (int placed = 0, attempts = 0; placed < discs && attempts < 100 * discs; ++attempts) {
    const Cell centre{static_cast<int>(rng.below(static_cast<std::uint64_t>(h))),
                      static_cast<int>(rng.below(static_cast<std::uint64_t>(w)))};
    if (distance(to_point(centre), to_point(terrain.start)) <= keep_out ||
        distance(to_point(centre), to_point(terrain.goal)) <= keep_out) {
      continue;
    }
    for (int dr = -radius; dr <= radius; ++dr) {
      for (int dc = -radius; dc <= radius; ++dc) {
        const Cell p{centre.row + dr, centre.col + dc};
        if (!b.labels.in_bounds(p) || dr * dr + dc * dc > radius * radius) continue;
        b.labels[p] = terrain.traversable[p] ? CellLabel::Wall : CellLabel::Free;
      }
    }
    ++placed;
  }
  return b;
}

std::size_t TraversabilityKnowledge::unknown_count() const {
  return static_cast<std::size_t>(std::count(labels.data().begin(), labels.data().end(), CellLabel::Unknown));
}

std::vector<Cell> visible_pixels(const LabelGrid& blockers, Cell pose, double radius) {
  if (!blockers.in_bounds(pose)) throw Error(ErrorCode::InvalidPose, "pose outside the raster");
  std::vector<Cell> out;
  const int span = static_cast<int>(std::ceil(radius));
  for (int dr = -span; dr <= span; ++dr) {
    for (int dc = -span; dc <= span; ++dc) {
      const Cell p{pose.row + dr, pose.col + dc};
      if (!blockers.in_bounds(p) || std::hypot(dr, dc) > radius) continue;
      const std::vector<Cell> ray = segment_pixels(to_point(pose), to_point(p));
      bool clear = true;
      for (std::size_t i = 1; i + 1 < ray.size() && clear; ++i) clear = blockers[ray[i]] != CellLabel::Wall;
      if (clear) out.push_back(p);
    }
  }
  return out;
}

TraversabilityKnowledge observe_radial(const TerrainMap& terrain, Cell pose, TraversabilityKnowledge knowledge,
                                       double radius) {
  if (!terrain.traversable.in_bounds(pose) || !terrain.traversable[pose]) {
    throw Error(ErrorCode::InvalidPose, "observation pose is not traversable");
  }
  if (!knowledge.labels.same_shape(terrain.traversable)) {
    knowledge = TraversabilityKnowledge(terrain.traversable.height(), terrain.traversable.width());
  }
  for (const Cell p : visible_pixels(terrain.labels(), pose, radius)) {
    knowledge.labels[p] = terrain.traversable[p] ? CellLabel::Free : CellLabel::Wall;
  }
  knowledge.observed_from.push_back(pose);
  return knowledge;
}

double comm_angle(int k) { return 2.0 * std::numbers::pi * k / kCommAngles; }

Observation cone_observation(const LabelGrid& knowledge, Cell pose, double angle, double radius) {
  return cone_observation(knowledge, pose, angle, visible_pixels(knowledge, pose, radius));
}

Observation cone_observation(const LabelGrid& knowledge, Cell pose, double angle, const std::vector<Cell>& visible) {
  Observation obs;
  const double c = std::cos(angle), s = std::sin(angle);
  const double half = std::cos(kCameraFov / 2.0 * std::numbers::pi / 180.0);
  Direction heading = Direction::East;
  if (std::abs(s) > std::abs(c)) heading = s > 0 ? Direction::North : Direction::South;
  else if (c < 0) heading = Direction::West;
  obs.camera = {pose, heading};
  for (const Cell p : visible) {
    if (p == pose || knowledge[p] == CellLabel::Unknown) continue;
    const double x = p.col - pose.col, y = -(p.row - pose.row);
    if ((x * c + y * s) < half * std::hypot(x, y) - 1e-12) continue;
    obs.visible.push_back(p);
    obs.labels.push_back(knowledge[p]);
  }
  return obs;
}

void write_pgm(const std::filesystem::path& path, const Grid<double>& raster) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  const auto [lo, hi] = std::minmax_element(raster.data().begin(), raster.data().end());
  const double span = raster.size() == 0 || *hi == *lo ? 1.0 : *hi - *lo;
  out << "P2\n" << raster.width() << ' ' << raster.height() << "\n255\n";
  for (int r = 0; r < raster.height(); ++r) {
    for (int c = 0; c < raster.width(); ++c) {
      out << (c ? " " : "") << static_cast<int>(std::lround(255.0 * (raster.at(r, c) - *lo) / span));
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

void write_pbm(const std::filesystem::path& path, const Grid<std::uint8_t>& mask) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "P1\n" << mask.width() << ' ' << mask.height() << '\n';
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) out << (c ? " " : "") << (mask.at(r, c) ? 1 : 0);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

}  // namespace conav
