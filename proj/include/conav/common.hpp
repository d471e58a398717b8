#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace conav {

enum class ErrorCode {
  InvalidConfiguration,
  InvalidArgument,
  InvalidPose,
  InvalidEdit,
  InvalidSegment,
  InvalidArchitecture,
  TrainingFailure,
  ContractViolation,
  PlanningFailure,
  SeedPlacementFailure,
  ProtocolError,
  SessionError,
  IoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Row-major cell coordinate, origin at the top-left.
struct Cell {
  int row = 0;
  int col = 0;

  friend constexpr bool operator==(const Cell&, const Cell&) = default;
  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

enum class Direction : std::uint8_t { North = 0, East = 1, South = 2, West = 3 };

inline constexpr std::array<Direction, 4> kDirections = {
    Direction::North, Direction::East, Direction::South, Direction::West};

constexpr Cell offset(Direction d) {
  switch (d) {
    case Direction::North: return {-1, 0};
    case Direction::East: return {0, 1};
    case Direction::South: return {1, 0};
    case Direction::West: return {0, -1};
  }
  return {0, 0};
}

constexpr Cell step(Cell c, Direction d) {
  const Cell o = offset(d);
  return {c.row + o.row, c.col + o.col};
}

char direction_letter(Direction d);
Direction direction_from_letter(char c);

/// Dense row-major 2-D array.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : height_(height), width_(width),
        data_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill) {}

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }

  bool in_bounds(Cell c) const noexcept {
    return c.row >= 0 && c.col >= 0 && c.row < height_ && c.col < width_;
  }
  bool on_border(Cell c) const noexcept {
    return c.row == 0 || c.col == 0 || c.row == height_ - 1 || c.col == width_ - 1;
  }

  std::size_t index(Cell c) const noexcept {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(c.col);
  }
  Cell cell_at(std::size_t i) const noexcept {
    return {static_cast<int>(i / static_cast<std::size_t>(width_)),
            static_cast<int>(i % static_cast<std::size_t>(width_))};
  }

  typename std::vector<T>::reference operator[](Cell c) { return data_[index(c)]; }
  typename std::vector<T>::const_reference operator[](Cell c) const { return data_[index(c)]; }
  typename std::vector<T>::reference at(int row, int col) { return data_[index({row, col})]; }
  typename std::vector<T>::const_reference at(int row, int col) const {
    return data_[index({row, col})];
  }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  bool same_shape(const auto& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

/// Seeded random source. Distributions are implemented here rather than via
/// <random> adaptors so sequences are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  int below(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

  bool bernoulli(double p) { return uniform() < p; }

  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(static_cast<std::uint64_t>(i))]);
    }
  }

  /// Independent child stream, e.g. one per episode or worker.
  Rng fork(std::uint64_t salt);

 private:
  std::mt19937_64 engine_;
};

}  // namespace conav
