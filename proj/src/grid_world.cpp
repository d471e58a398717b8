#include "conav/grid_world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace conav {

Action Action::from_index(int i) {
  if (i < 0 || i >= 8) throw Error(ErrorCode::InvalidArgument, "action index out of range");
  const auto d = static_cast<Direction>(i % 4);
  return i < 4 ? move(d) : communicate(d);
}

std::string to_string(const Action& a) {
  return std::string(a.is_move() ? "move-" : "comm-") + direction_letter(a.direction);
}

KnowledgeGrid::KnowledgeGrid(int height, int width, int radius_)
    : labels(height, width, CellLabel::Unknown), visited(height, width, 0), radius(radius_) {}

std::size_t KnowledgeGrid::unknown_count() const {
  return static_cast<std::size_t>(
      std::count(labels.data().begin(), labels.data().end(), CellLabel::Unknown));
}

namespace {

// Lattice cells sit at odd coordinates; the walls between them at mixed parity.
std::vector<Cell> lattice_neighbours(Cell c, int size) {
  std::vector<Cell> out;
  for (const Direction d : kDirections) {
    const Cell o = offset(d);
    const Cell n{c.row + 2 * o.row, c.col + 2 * o.col};
    if (n.row > 0 && n.col > 0 && n.row < size - 1 && n.col < size - 1) out.push_back(n);
  }
  return out;
}

}  // namespace

GridMaze generate_maze(std::uint64_t seed, int size) {
  if (size < 5 || size % 2 == 0) {
    throw Error(ErrorCode::InvalidConfiguration,
                "maze size must be odd and >= 5, got " + std::to_string(size));
  }
  Rng rng(seed);
  GridMaze maze;
  maze.cells = LabelGrid(size, size, CellLabel::Wall);

  // Recursive backtracker with an explicit stack.
  const int lattice = (size - 1) / 2;
  const Cell origin{2 * rng.below(lattice) + 1, 2 * rng.below(lattice) + 1};
  maze.cells[origin] = CellLabel::Free;
  std::vector<Cell> stack{origin};
  while (!stack.empty()) {
    const Cell cur = stack.back();
    std::vector<Cell> options;
    for (const Cell n : lattice_neighbours(cur, size)) {
      if (maze.cells[n] == CellLabel::Wall) options.push_back(n);
    }
    if (options.empty()) {
      stack.pop_back();
      continue;
    }
    const Cell next = options[rng.below(static_cast<int>(options.size()))];
    maze.cells[{(cur.row + next.row) / 2, (cur.col + next.col) / 2}] = CellLabel::Free;
    maze.cells[next] = CellLabel::Free;
    stack.push_back(next);
  }

  // Knock out a tenth of the remaining separator walls to create loops.
  std::vector<Cell> separators;
  for (int r = 1; r < size - 1; ++r) {
    for (int c = 1; c < size - 1; ++c) {
      if ((r + c) % 2 == 1 && maze.cells.at(r, c) == CellLabel::Wall) separators.push_back({r, c});
    }
  }
  rng.shuffle(separators);
  const auto knock = static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(separators.size())));
  for (std::size_t i = 0; i < knock; ++i) maze.cells[separators[i]] = CellLabel::Free;

  // Start on a lattice cell nearest the centre.
  const double mid = (size - 1) / 2.0;
  std::vector<Cell> central;
  double best = 1e9;
  for (int r = 1; r < size - 1; r += 2) {
    for (int c = 1; c < size - 1; c += 2) {
      const double d = std::abs(r - mid) + std::abs(c - mid);
      if (d < best - 1e-9) {
        best = d;
        central.clear();
      }
      if (std::abs(d - best) < 1e-9) central.push_back({r, c});
    }
  }
  maze.start = central[rng.below(static_cast<int>(central.size()))];

  // One goal per quadrant, preferring cells other than the start.
  const int half = size / 2;
  for (int q = 0; q < 4; ++q) {
    const bool bottom = q >= 2;
    const bool right = q % 2 == 1;
    std::vector<Cell> candidates;
    for (int r = 1; r < size - 1; ++r) {
      for (int c = 1; c < size - 1; ++c) {
        if ((r < half) == bottom || r == half) continue;
        if ((c < half) == right || c == half) continue;
        const Cell cell{r, c};
        if (maze.cells[cell] == CellLabel::Free && cell != maze.start) candidates.push_back(cell);
      }
    }
    if (candidates.empty()) {
      maze.goals.push_back(maze.start);
    } else {
      maze.goals.push_back(candidates[rng.below(static_cast<int>(candidates.size()))]);
    }
  }
  return maze;
}

RobotPose transition(const GridMaze& maze, RobotPose pose, Direction move) {
  const Cell target = step(pose.cell, move);
  return {maze.is_free(target) ? target : pose.cell, move};
}

Observation visible_cells(const GridMaze& maze, RobotPose camera, const VisibilityConfig& config) {
  if (!maze.is_free(camera.cell)) {
    throw Error(ErrorCode::InvalidPose, "camera must be on a free cell");
  }
  Observation obs;
  obs.camera = camera;
  const Cell h = offset(camera.heading);
  const double cos_half = std::cos(config.fov_degrees * M_PI / 360.0);
  const int reach = static_cast<int>(std::ceil(config.range));
  for (int dr = -reach; dr <= reach; ++dr) {
    for (int dc = -reach; dc <= reach; ++dc) {
      if (dr == 0 && dc == 0) continue;
      const Cell target{camera.cell.row + dr, camera.cell.col + dc};
      if (!maze.cells.in_bounds(target)) continue;
      const double dist = std::hypot(dr, dc);
      if (dist > config.range + 1e-9) continue;
      const double cos_angle = (dr * h.row + dc * h.col) / dist;
      if (cos_angle < cos_half - 1e-9) continue;
      const bool clear = trace_segment(camera.cell, target, [&](Cell c) { return maze.is_wall(c); });
      if (!clear) continue;
      obs.visible.push_back(target);
      obs.labels.push_back(maze.cells[target]);
    }
  }
  return obs;
}

void reveal_in_place(KnowledgeGrid& knowledge, Cell cell, const GridMaze& maze) {
  knowledge.visited[cell] = 1;
  knowledge.labels[cell] = maze.cells[cell];
  const int d = knowledge.radius;
  for (int dr = -d; dr <= d; ++dr) {
    for (int dc = -d; dc <= d; ++dc) {
      const Cell target{cell.row + dr, cell.col + dc};
      if (!maze.cells.in_bounds(target)) continue;
      if (knowledge.labels[target] != CellLabel::Unknown) continue;
      if (trace_segment(cell, target, [&](Cell c) { return maze.is_wall(c); })) {
        knowledge.labels[target] = maze.cells[target];
      }
    }
  }
}

KnowledgeGrid reveal(KnowledgeGrid knowledge, RobotPose pose, const GridMaze& maze) {
  reveal_in_place(knowledge, pose.cell, maze);
  return knowledge;
}

std::string to_text(const GridMaze& maze) {
  std::string out;
  out.reserve(static_cast<std::size_t>(maze.height() * (maze.width() + 1)));
  for (int r = 0; r < maze.height(); ++r) {
    for (int c = 0; c < maze.width(); ++c) {
      const Cell cell{r, c};
      char ch = maze.cells[cell] == CellLabel::Wall ? '#' : '.';
      if (std::find(maze.goals.begin(), maze.goals.end(), cell) != maze.goals.end()) ch = 'G';
      if (cell == maze.start) ch = 'S';
      out.push_back(ch);
    }
    out.push_back('\n');
  }
  return out;
}

GridMaze maze_from_text(std::string_view text) {
  std::vector<std::string> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) rows.push_back(line);
  }
  if (rows.empty()) throw Error(ErrorCode::IoError, "empty maze text");
  const int height = static_cast<int>(rows.size());
  const int width = static_cast<int>(rows.front().size());
  GridMaze maze;
  maze.cells = LabelGrid(height, width, CellLabel::Wall);
  bool has_start = false;
  for (int r = 0; r < height; ++r) {
    if (static_cast<int>(rows[r].size()) != width) {
      throw Error(ErrorCode::IoError, "ragged maze row " + std::to_string(r));
    }
    for (int c = 0; c < width; ++c) {
      const char ch = rows[r][c];
      switch (ch) {
        case '#': break;
        case '.': maze.cells.at(r, c) = CellLabel::Free; break;
        case 'S':
          maze.cells.at(r, c) = CellLabel::Free;
          maze.start = {r, c};
          has_start = true;
          break;
        case 'G':
          maze.cells.at(r, c) = CellLabel::Free;
          maze.goals.push_back({r, c});
          break;
        default:
          throw Error(ErrorCode::IoError, std::string("unexpected maze character '") + ch + "'");
      }
    }
  }
  if (!has_start) throw Error(ErrorCode::IoError, "maze has no start cell");
  return maze;
}

void save_maze(const GridMaze& maze, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << to_text(maze);
}

GridMaze load_maze(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return maze_from_text(buf.str());
}

Grid<std::uint8_t> flood_fill(const LabelGrid& labels, Cell from) {
  Grid<std::uint8_t> seen(labels.height(), labels.width(), 0);
  if (!labels.in_bounds(from) || labels[from] != CellLabel::Free) return seen;
  std::vector<Cell> stack{from};
  seen[from] = 1;
  while (!stack.empty()) {
    const Cell c = stack.back();
    stack.pop_back();
    for (const Direction d : kDirections) {
      const Cell n = step(c, d);
      if (labels.in_bounds(n) && !seen[n] && labels[n] == CellLabel::Free) {
        seen[n] = 1;
        stack.push_back(n);
      }
    }
  }
  return seen;
}

}  // namespace conav
