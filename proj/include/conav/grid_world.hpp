#pragma once

#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "conav/common.hpp"

namespace conav {

enum class CellLabel : std::uint8_t { Free = 0, Wall = 1, Unknown = 2 };

using LabelGrid = Grid<CellLabel>;

/// Ground-truth maze. Border cells are walls; start and goals are free.
struct GridMaze {
  LabelGrid cells;
  std::vector<Cell> goals;
  Cell start;

  int height() const { return cells.height(); }
  int width() const { return cells.width(); }
  bool is_wall(Cell c) const { return !cells.in_bounds(c) || cells[c] == CellLabel::Wall; }
  bool is_free(Cell c) const { return cells.in_bounds(c) && cells[c] == CellLabel::Free; }

  friend bool operator==(const GridMaze&, const GridMaze&) = default;
};

struct RobotPose {
  Cell cell;
  Direction heading = Direction::North;

  friend bool operator==(const RobotPose&, const RobotPose&) = default;
};

/// One of the eight primitive actions: four movements then four camera
/// directions for an image transmission.
struct Action {
  enum class Kind : std::uint8_t { Move, Communicate };

  Kind kind = Kind::Move;
  Direction direction = Direction::North;

  static constexpr Action move(Direction d) { return {Kind::Move, d}; }
  static constexpr Action communicate(Direction d) { return {Kind::Communicate, d}; }

  bool is_move() const { return kind == Kind::Move; }
  bool is_communicate() const { return kind == Kind::Communicate; }
  int index() const { return static_cast<int>(direction) + (is_move() ? 0 : 4); }
  static Action from_index(int i);

  friend bool operator==(const Action&, const Action&) = default;
};

std::string to_string(const Action& a);

struct Observation {
  RobotPose camera;  ///< heading is the camera direction
  std::vector<Cell> visible;
  std::vector<CellLabel> labels;  ///< parallel to visible
};

struct VisibilityConfig {
  double fov_degrees = 90.0;
  double range = 6.0;
};

/// The robot's accumulated map: everything observed within `radius`
/// (Chebyshev, line-of-sight) of a visited cell.
struct KnowledgeGrid {
  LabelGrid labels;
  Grid<std::uint8_t> visited;
  int radius = 2;

  KnowledgeGrid() = default;
  KnowledgeGrid(int height, int width, int radius);

  CellLabel operator[](Cell c) const { return labels[c]; }
  std::size_t unknown_count() const;

  friend bool operator==(const KnowledgeGrid&, const KnowledgeGrid&) = default;
};

GridMaze generate_maze(std::uint64_t seed, int size = 13);

/// Deterministic motion primitive. Blocked moves keep the cell but still
/// turn the robot.
RobotPose transition(const GridMaze& maze, RobotPose pose, Direction move);

/// Visits the cells whose interior the open segment between the two cell
/// centres passes through, in order, excluding both endpoints. Segments
/// through an exact lattice corner do not touch the two side cells. Returns
/// false as soon as `blocked(cell)` is true.
template <typename Blocked>
bool trace_segment(Cell from, Cell to, Blocked&& blocked) {
  // Doubled coordinates make centres odd integers and cell boundaries even.
  const long dr = 2L * (to.row - from.row);
  const long dc = 2L * (to.col - from.col);
  const int sr = dr > 0 ? 1 : (dr < 0 ? -1 : 0);
  const int sc = dc > 0 ? 1 : (dc < 0 ? -1 : 0);
  const long adr = std::labs(dr);
  const long adc = std::labs(dc);
  if (adr == 0 && adc == 0) return true;
  Cell cur = from;
  // Distance (doubled units) from the start point to the next boundary along
  // each axis; the first boundary is always 1 away.
  long next_r = 1;
  long next_c = 1;
  while (true) {
    // Crossing times are next_r/adr and next_c/adc; compare without division.
    const long row_time = next_r * adc;
    const long col_time = next_c * adr;
    if (adc == 0 || (adr != 0 && row_time < col_time)) {
      cur.row += sr;
      next_r += 2;
    } else if (adr == 0 || col_time < row_time) {
      cur.col += sc;
      next_c += 2;
    } else {
      cur.row += sr;
      cur.col += sc;
      next_r += 2;
      next_c += 2;
    }
    if (cur == to) return true;
    if (blocked(cur)) return false;
  }
}

/// Cells seen by a camera at `camera.cell` facing `camera.heading`: centre in
/// the field-of-view cone and within range, with no wall strictly before it
/// on the centre-to-centre segment. The camera cell itself is excluded.
Observation visible_cells(const GridMaze& maze, RobotPose camera,
                          const VisibilityConfig& config = {});

KnowledgeGrid reveal(KnowledgeGrid knowledge, RobotPose pose, const GridMaze& maze);
void reveal_in_place(KnowledgeGrid& knowledge, Cell cell, const GridMaze& maze);

/// Text format: one row per line, `#` wall, `.` free, `S` start, `G` goal.
std::string to_text(const GridMaze& maze);
GridMaze maze_from_text(std::string_view text);
void save_maze(const GridMaze& maze, const std::string& path);
GridMaze load_maze(const std::string& path);

/// Cells reachable from `from` through free cells of `labels` (4-connected).
Grid<std::uint8_t> flood_fill(const LabelGrid& labels, Cell from);

/// BFS shortest path over cells satisfying `passable`; ties broken by
/// expanding neighbours in lexicographic cell order. Empty when unreachable;
/// otherwise includes both ends.
template <typename Passable>
std::vector<Cell> bfs_path(int height, int width, Cell from, Cell to, Passable&& passable);

}  // namespace conav

#include "conav/detail/bfs.hpp"
