#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <queue>
#include <set>

#include <json.hpp>

#include "conav/continuous.hpp"

namespace conav {

void SeedConfig::validate() const {
  if (count < 2) throw Error(ErrorCode::InvalidConfiguration, "at least two seeds are needed");
  if (!(boundary_fraction >= 0.0 && boundary_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidConfiguration, "boundary fraction must be in [0,1]");
  }
  if (!(min_spacing >= 0.0)) throw Error(ErrorCode::InvalidConfiguration, "seed spacing must be >= 0");
  if (!(boundary_band > 0.0)) throw Error(ErrorCode::InvalidConfiguration, "boundary band must be > 0");
}

std::vector<Cell> sample_seeds(const LabelGrid& knowledge, const SeedConfig& config, Rng& rng) {
  config.validate();
  std::vector<Cell> open;
  Grid<std::uint8_t> near(knowledge.height(), knowledge.width(), 0);
  const int band = static_cast<int>(std::floor(config.boundary_band));
  for (int r = 0; r < knowledge.height(); ++r) {
    for (int c = 0; c < knowledge.width(); ++c) {
      if (knowledge.at(r, c) != CellLabel::Wall) {
        open.push_back({r, c});
        continue;
      }
      for (int dr = -band; dr <= band; ++dr) {
        for (int dc = -band; dc <= band; ++dc) {
          const Cell p{r + dr, c + dc};
          if (near.in_bounds(p) && std::hypot(dr, dc) <= config.boundary_band) near[p] = 1;
        }
      }
    }
  }
  std::vector<Cell> boundary;
  for (const Cell p : open)
    if (near[p]) boundary.push_back(p);

  std::vector<Cell> seeds;
  const double spacing2 = config.min_spacing * config.min_spacing;
  auto place = [&](const std::vector<Cell>& pool, int quota) {
    int placed = 0;
    if (pool.empty()) return 0;
    for (int attempt = 0; placed < quota && attempt < 50 * quota + 1000; ++attempt) {
      const Cell p = pool[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(pool.size())))];
      const bool spaced = std::none_of(seeds.begin(), seeds.end(), [&](Cell s) {
        const double dr = s.row - p.row, dc = s.col - p.col;
        return dr * dr + dc * dc < spacing2;
      });
      if (!spaced) continue;
      seeds.push_back(p);
      ++placed;
    }
    return placed;
  };
  const int boundary_quota = static_cast<int>(std::lround(config.boundary_fraction * config.count));
  const int from_boundary = place(boundary, boundary_quota);
  const int rest = config.count - from_boundary;
  if (place(open, rest) < rest) {
    throw Error(ErrorCode::SeedPlacementFailure,
                "placed " + std::to_string(seeds.size()) + " of " + std::to_string(config.count) + " seeds");
  }
  return seeds;
}

int VoronoiGraph::node_at(Cell pixel) const { return region.in_bounds(pixel) ? region[pixel] : -1; }

int VoronoiGraph::neighbor(int node, int edge_index) const {
  const GraphEdge& e = edges.at(static_cast<std::size_t>(edge_index));
  return e.a == node ? e.b : e.a;
}

const GraphEdge* VoronoiGraph::edge_between(int a, int b) const {
  if (a < 0 || a >= size()) return nullptr;
  for (const int e : adjacency[static_cast<std::size_t>(a)])
    if (neighbor(a, e) == b) return &edges[static_cast<std::size_t>(e)];
  return nullptr;
}

double VoronoiGraph::mean_edge_length() const {
  if (edges.empty()) return 1.0;
  double sum = 0.0;
  for (const GraphEdge& e : edges) sum += e.length;
  return sum / static_cast<double>(edges.size());
}

std::string VoronoiGraph::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (int i = 0; i < size(); ++i) {
    const Point c = centroids[static_cast<std::size_t>(i)];
    const Cell s = seeds[static_cast<std::size_t>(i)];
    nodes.push_back({{"id", i}, {"row", c.row}, {"col", c.col}, {"seed", {s.row, s.col}}});
  }
  nlohmann::json edge_list = nlohmann::json::array();
  for (const GraphEdge& e : edges) {
    edge_list.push_back({{"a", e.a}, {"b", e.b}, {"length", e.length}, {"uncertain", e.uncertain}});
  }
  return nlohmann::json{{"v", 1},
                        {"height", region.height()},
                        {"width", region.width()},
                        {"nodes", std::move(nodes)},
                        {"edges", std::move(edge_list)}}
      .dump(2);
}

VoronoiGraph build_graph(const LabelGrid& knowledge, const std::vector<Cell>& seeds) {
  if (seeds.size() < 2) throw Error(ErrorCode::InvalidArgument, "a graph needs at least two seeds");
  for (const Cell s : seeds) {
    if (!knowledge.in_bounds(s) || knowledge[s] == CellLabel::Wall) {
      throw Error(ErrorCode::InvalidArgument, "seeds must lie on non-obstacle pixels");
    }
  }
  VoronoiGraph g;
  g.seeds = seeds;
  g.region = Grid<int>(knowledge.height(), knowledge.width(), -1);
  const std::size_t n = seeds.size();
  std::vector<double> sum_r(n, 0.0), sum_c(n, 0.0);
  std::vector<int> count(n, 0);
  for (int r = 0; r < knowledge.height(); ++r) {
    for (int c = 0; c < knowledge.width(); ++c) {
      if (knowledge.at(r, c) == CellLabel::Wall) continue;
      int best = 0;
      long long best_d = -1;
      for (std::size_t i = 0; i < n; ++i) {
        const long long dr = seeds[i].row - r, dc = seeds[i].col - c;
        const long long d = dr * dr + dc * dc;
        if (best_d < 0 || d < best_d) {
          best_d = d;
          best = static_cast<int>(i);
        }
      }
      g.region.at(r, c) = best;
      sum_r[static_cast<std::size_t>(best)] += r;
      sum_c[static_cast<std::size_t>(best)] += c;
      ++count[static_cast<std::size_t>(best)];
    }
  }
  g.centroids.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.centroids[i] = {sum_r[i] / count[i], sum_c[i] / count[i]};

  std::set<std::pair<int, int>> candidates;
  for (int r = 0; r < knowledge.height(); ++r) {
    for (int c = 0; c < knowledge.width(); ++c) {
      const int a = g.region.at(r, c);
      if (a < 0) continue;
      for (const Cell p : {Cell{r, c + 1}, Cell{r + 1, c}}) {
        if (!g.region.in_bounds(p)) continue;
        const int b = g.region[p];
        if (b >= 0 && b != a) candidates.insert({std::min(a, b), std::max(a, b)});
      }
    }
  }
  for (const auto& [a, b] : candidates) {
    const Point pa = g.centroids[static_cast<std::size_t>(a)], pb = g.centroids[static_cast<std::size_t>(b)];
    bool clear = true, uncertain = false;
    for (const Cell p : segment_pixels(pa, pb)) {
      if (!knowledge.in_bounds(p) || knowledge[p] == CellLabel::Wall) {
        clear = false;
        break;
      }
      uncertain = uncertain || knowledge[p] == CellLabel::Unknown;
    }
    if (clear) g.edges.push_back({a, b, distance(pa, pb), uncertain});
  }
  g.adjacency.assign(n, {});
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    g.adjacency[static_cast<std::size_t>(g.edges[e].a)].push_back(static_cast<int>(e));
    g.adjacency[static_cast<std::size_t>(g.edges[e].b)].push_back(static_cast<int>(e));
  }
  for (int i = 0; i < g.size(); ++i) {
    auto& adj = g.adjacency[static_cast<std::size_t>(i)];
    std::sort(adj.begin(), adj.end(), [&](int x, int y) { return g.neighbor(i, x) < g.neighbor(i, y); });
  }
  return g;
}

std::vector<int> greedy_bfs(const VoronoiGraph& graph, int agent, int goal) {
  if (agent < 0 || agent >= graph.size() || goal < 0 || goal >= graph.size()) {
    throw Error(ErrorCode::InvalidArgument, "node outside the graph");
  }
  std::vector<int> parent(static_cast<std::size_t>(graph.size()), -2);
  std::deque<int> frontier{agent};
  parent[static_cast<std::size_t>(agent)] = -1;
  while (!frontier.empty() && parent[static_cast<std::size_t>(goal)] == -2) {
    const int v = frontier.front();
    frontier.pop_front();
    for (const int e : graph.adjacency[static_cast<std::size_t>(v)]) {
      const int w = graph.neighbor(v, e);
      if (parent[static_cast<std::size_t>(w)] != -2) continue;
      parent[static_cast<std::size_t>(w)] = v;
      frontier.push_back(w);
    }
  }
  if (parent[static_cast<std::size_t>(goal)] == -2) return {};
  std::vector<int> path;
  for (int v = goal; v != -1; v = parent[static_cast<std::size_t>(v)]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<Cell> belief_path(const BeliefMap& belief, Cell from, Cell to) {
  const LabelGrid& labels = belief.labels;
  if (!labels.in_bounds(from) || !labels.in_bounds(to) || (belief.is_wall(to) && to != from)) return {};
  Grid<double> dist(labels.height(), labels.width(), std::numeric_limits<double>::infinity());
  Grid<int> parent(labels.height(), labels.width(), -1);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  dist[from] = 0.0;
  queue.push({0.0, labels.index(from)});
  while (!queue.empty()) {
    const auto [d, i] = queue.top();
    queue.pop();
    const Cell c = labels.cell_at(i);
    if (d > dist[c]) continue;
    if (c == to) break;
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        const Cell n{c.row + dr, c.col + dc};
        if ((dr == 0 && dc == 0) || !labels.in_bounds(n) || belief.is_wall(n)) continue;
        const double nd = d + (dr != 0 && dc != 0 ? std::numbers::sqrt2 : 1.0);
        if (nd < dist[n]) {
          dist[n] = nd;
          parent[n] = static_cast<int>(i);
          queue.push({nd, labels.index(n)});
        }
      }
    }
  }
  if (!std::isfinite(dist[to])) return {};
  std::vector<Cell> path;
  for (Cell c = to;; c = labels.cell_at(static_cast<std::size_t>(parent[c]))) {
    path.push_back(c);
    if (c == from) break;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace conav
