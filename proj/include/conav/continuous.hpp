#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "conav/belief.hpp"
#include "conav/mcts.hpp"
#include "conav/planner.hpp"
#include "conav/synth_human.hpp"

namespace conav {

inline constexpr int kTerrainSize = 150;
inline constexpr double kObservationRadius = 50.0;

/// Sub-pixel position, row and column in pixel units.
struct Point {
  double row = 0.0;
  double col = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point to_point(Cell c) { return {static_cast<double>(c.row), static_cast<double>(c.col)}; }
Cell nearest_pixel(Point p);
double distance(Point a, Point b);

/// Pixels hit by sampling the segment every 0.25 px from `a`, plus the
/// pixel of `b`. Consecutive duplicates are dropped.
std::vector<Cell> segment_pixels(Point a, Point b);

struct TerrainMap {
  Grid<double> height;
  double water_level = 0.0;
  Grid<std::uint8_t> traversable;  ///< height < water_level
  Cell start;
  Cell goal;

  /// Free for traversable pixels, Wall for obstacles.
  LabelGrid labels() const;
  double traversable_fraction() const;
};

TerrainMap generate_terrain(std::uint64_t seed);
/// A terrain whose height is 0 on traversable pixels and 1 elsewhere.
TerrainMap terrain_from_mask(const Grid<std::uint8_t>& traversable, Cell start, Cell goal);

/// An operator map for a generated terrain: the truth with `discs` random
/// discs of `radius` px inverted, none touching the start or goal.
BeliefMap perturbed_belief(const TerrainMap& terrain, int discs, int radius, Rng& rng);

/// Robot knowledge per pixel: Free (traversable), Wall (obstacle) or Unknown.
struct TraversabilityKnowledge {
  LabelGrid labels;
  std::vector<Cell> observed_from;

  TraversabilityKnowledge() = default;
  TraversabilityKnowledge(int height, int width) : labels(height, width, CellLabel::Unknown) {}
  std::size_t unknown_count() const;
};

/// Pixels within `radius` of `pose` whose segment from the pose crosses no
/// Wall pixel of `blockers` before reaching them.
std::vector<Cell> visible_pixels(const LabelGrid& blockers, Cell pose, double radius = kObservationRadius);

/// Reveals the true label of every pixel visible from `pose`.
TraversabilityKnowledge observe_radial(const TerrainMap& terrain, Cell pose, TraversabilityKnowledge knowledge,
                                       double radius = kObservationRadius);

struct SeedConfig {
  int count = 180;
  double boundary_fraction = 0.4;
  double min_spacing = 4.0;
  double boundary_band = 5.0;  ///< "near a boundary" distance, px

  void validate() const;
};

/// Boundary seeds come from non-Wall pixels within the band of a Wall
/// pixel; when that band has no room left the remainder is drawn uniformly.
std::vector<Cell> sample_seeds(const LabelGrid& knowledge, const SeedConfig& config, Rng& rng);

struct GraphEdge {
  int a = 0;
  int b = 0;
  double length = 0.0;
  bool uncertain = false;  ///< the segment crosses an Unknown pixel

  friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

struct VoronoiGraph {
  std::vector<Cell> seeds;
  Grid<int> region;  ///< seed index per non-Wall pixel, -1 on walls
  std::vector<Point> centroids;
  std::vector<GraphEdge> edges;  ///< a < b, sorted
  std::vector<std::vector<int>> adjacency;  ///< edge indices per node

  int size() const { return static_cast<int>(centroids.size()); }
  int node_at(Cell pixel) const;
  int neighbor(int node, int edge_index) const;
  const GraphEdge* edge_between(int a, int b) const;
  double mean_edge_length() const;
  std::string to_json() const;

  friend bool operator==(const VoronoiGraph&, const VoronoiGraph&) = default;
};

VoronoiGraph build_graph(const LabelGrid& knowledge, const std::vector<Cell>& seeds);

/// Minimum-hop node path from agent to goal; empty when disconnected.
std::vector<int> greedy_bfs(const VoronoiGraph& graph, int agent, int goal);

/// Shortest 8-connected path over pixels the belief marks free (the first
/// pixel is exempt); empty when none exists.
std::vector<Cell> belief_path(const BeliefMap& belief, Cell from, Cell to);

inline constexpr int kCommAngles = 16;
inline constexpr double kCameraFov = 90.0;

double comm_angle(int k);
/// Known pixels visible from `pose` inside the 90 degree cone at `angle`
/// (radians, counter-clockwise from east), labelled from the knowledge.
Observation cone_observation(const LabelGrid& knowledge, Cell pose, double angle,
                             double radius = kObservationRadius);
/// The same, from a precomputed visible_pixels(knowledge, pose, radius).
Observation cone_observation(const LabelGrid& knowledge, Cell pose, double angle, const std::vector<Cell>& visible);

struct ContinuousPlanningContext {
  const VoronoiGraph* graph = nullptr;
  const LabelGrid* knowledge = nullptr;
  Cell robot;
  int goal_node = -1;
  std::vector<int> guidance;  ///< zeta as node ids
  std::vector<int> history;   ///< nodes since the last communication, ending at the agent node
  std::vector<Cell> trail;    ///< pixels driven since the last communication
  std::shared_ptr<const BeliefMap> belief;
  const PerceptionModel* model = nullptr;
  RewardConfig rewards;
  double comm_cost = 8.0;
  bool communication_enabled = true;
  int comm_horizon = 2;  ///< a communication is planned only within this many hops of the root, once per branch
};

struct ContinuousState {
  std::vector<int> tau;
  std::shared_ptr<const BeliefMap> belief;
  bool goal_reached = false;
  int last_comm = -1;  ///< index into tau of the latest planned communication
};

/// Probability that a rollout hop follows the guidance (the neighbour
/// furthest along zeta, else one fewer hops from the goal) instead of a
/// uniform neighbour.
inline constexpr double kGuidedHop = 0.95;

/// Actions 0..size-1 hop to that node; size + k communicates at angle k.
/// A communication leaves tau as it is: the robot has not moved. Since the
/// belief only affects later communication gains, an angle is offered only
/// when its expected gain exceeds the communication cost.
class ContinuousPlanningDomain {
 public:
  explicit ContinuousPlanningDomain(const ContinuousPlanningContext& context);

  std::vector<int> actions(const ContinuousState& s) const;
  bool terminal(const ContinuousState& s) const { return s.goal_reached; }
  Expansion<ContinuousState> expand(const ContinuousState& s, int action) const;
  RolloutResult rollout(const ContinuousState& s, int depth_budget, double discount, Rng& rng) const;

  struct CommOutcome {
    double gain = 0.0;
    std::shared_ptr<const BeliefMap> belief;
  };
  CommOutcome communicate(const ContinuousState& s, int angle_index) const;
  double move_reward(const std::vector<int>& tau, double length) const;

  ContinuousState root_state() const;

 private:
  Cell pose_of(const std::vector<int>& tau) const;
  const std::vector<Cell>& visible_from(Cell pose) const;
  /// Index into the neighbours of `here` for a guided rollout hop, or -1.
  int guided_hop(int here) const;

  const ContinuousPlanningContext& ctx_;
  double normalizer_ = 1.0;
  std::vector<int> hops_to_goal_;
  std::vector<int> guidance_rank_;
  mutable std::unordered_map<std::string, CommOutcome> comm_cache_;
  mutable std::unordered_map<int, std::vector<Cell>> visible_cache_;
};

struct ContinuousAction {
  bool communicate = false;
  int target = -1;  ///< node to hop to, or angle index

  friend bool operator==(const ContinuousAction&, const ContinuousAction&) = default;
};

ContinuousAction plan_continuous(const ContinuousPlanningContext& context, const MctsConfig& config, Rng& rng);

/// The synthetic operator at raster resolution: its decay is per pixel and
/// it makes no spurious edits.
SynthHumanConfig continuous_human_config();

enum class ContinuousPolicy : std::uint8_t { IgMcts, GreedyBfs };
std::string to_string(ContinuousPolicy p);
ContinuousPolicy continuous_policy_from_string(const std::string& name);

struct ContinuousEpisodeConfig {
  ContinuousPolicy policy = ContinuousPolicy::IgMcts;
  std::uint64_t seed = 0;
  MctsConfig mcts{300, 1.4142135623730951, 0.99, 30};
  RewardConfig rewards;
  SeedConfig seeds;
  SynthHumanConfig human = continuous_human_config();
  double comm_cost = 8.0;
  int max_turns = 400;
};

struct ContinuousEpisodeResult {
  bool reached_goal = false;
  double path_length = 0.0;  ///< executed, px
  int hops = 0;
  int bumps = 0;
  int communications = 0;
  std::vector<Cell> trajectory;        ///< robot pixels, start first
  std::vector<std::vector<Cell>> guidance;  ///< every guidance polyline issued
  TraversabilityKnowledge knowledge;
  BeliefMap human_belief;
  VoronoiGraph graph;  ///< the last one built
};

/// The robot starts knowing only what it sees from the start pixel. The
/// synthetic operator starts from `human_map`. `model` predicts the
/// operator for IG-MCTS; null uses the operator's exact probabilities.
ContinuousEpisodeResult run_continuous_episode(const TerrainMap& terrain, const BeliefMap& human_map,
                                               const ContinuousEpisodeConfig& config,
                                               const PerceptionModel* model = nullptr);

/// A pocket open towards the start with the goal behind its closed end. The
/// operator's map is correct about the pocket but has errors near the start.
struct Showcase {
  TerrainMap terrain;
  BeliefMap human_map;
};
Showcase dead_end_showcase();

/// Portable graymap (P2) of a raster scaled to 0..255.
void write_pgm(const std::filesystem::path& path, const Grid<double>& raster);
/// Portable bitmap (P1); set pixels are written black.
void write_pbm(const std::filesystem::path& path, const Grid<std::uint8_t>& mask);

}  // namespace conav
