#pragma once

#include <algorithm>
#include <deque>
#include <vector>

namespace conav {

template <typename Passable>
std::vector<Cell> bfs_path(int height, int width, Cell from, Cell to, Passable&& passable) {
  Grid<int> parent(height, width, -1);
  if (!parent.in_bounds(from) || !parent.in_bounds(to)) return {};
  if (from == to) return {from};
  // Neighbours in lexicographic (row, col) order: N, W, E, S.
  static constexpr Cell kOrder[] = {{-1, 0}, {0, -1}, {0, 1}, {1, 0}};
  std::deque<Cell> frontier{from};
  parent[from] = static_cast<int>(parent.index(from));
  while (!frontier.empty()) {
    const Cell cur = frontier.front();
    frontier.pop_front();
    for (const Cell o : kOrder) {
      const Cell next{cur.row + o.row, cur.col + o.col};
      if (!parent.in_bounds(next) || parent[next] != -1 || !passable(next)) continue;
      parent[next] = static_cast<int>(parent.index(cur));
      if (next == to) {
        std::vector<Cell> path{to};
        Cell c = to;
        while (c != from) {
          c = parent.cell_at(static_cast<std::size_t>(parent[c]));
          path.push_back(c);
        }
        std::reverse(path.begin(), path.end());
        return path;
      }
      frontier.push_back(next);
    }
  }
  return {};
}

}  // namespace conav
