#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "conav/planner.hpp"

namespace conav {

enum class WorldKind : std::uint8_t { Discrete, Continuous };
enum class PolicyKind : std::uint8_t { IgMcts, InstructionFollowing, TeleopStream };
enum class HumanKind : std::uint8_t { Synthetic, Live };

std::string to_string(WorldKind w);
std::string to_string(PolicyKind p);
std::string to_string(HumanKind h);
WorldKind world_from_string(const std::string& s);
PolicyKind policy_from_string(const std::string& s);
HumanKind human_from_string(const std::string& s);

/// Which perception model the IG-MCTS robot plans with.
struct ModelSpec {
  std::string kind = "synthetic";  ///< "synthetic" | "glpf" | "nhpm"
  std::string path;                ///< checkpoint for "nhpm"
  GlpfParams glpf;
  bool symmetrized = false;        ///< dihedral-averaged NHPM prediction
};

struct EpisodeConfig {
  WorldKind world = WorldKind::Discrete;
  std::uint64_t seed = 1;
  PolicyKind policy = PolicyKind::IgMcts;
  HumanKind human = HumanKind::Synthetic;
  int step_budget = 300;
  double mb_per_image = 0.18;
  int maze_size = 13;
  double corruption = 0.15;
  int knowledge_radius = 2;
  int max_guidance_retries = 50;  ///< consecutive blocked requests before giving up
  VisibilityConfig camera;
  SynthHumanConfig synthetic_human;
  MctsConfig mcts;
  RewardConfig rewards;
  ModelSpec model;

  void validate() const;
};

struct TurnRecord {
  int turn = 0;
  int step = 0;
  std::string kind;    ///< "move" | "communicate" | "guidance" | "blocked" | "frame"
  std::string detail;  ///< action, or guidance length
  Cell cell;
};

struct EpisodeMetrics {
  int steps = 0;
  int images = 0;
  int guidance_instances = 0;
  double communication_mb = 0.0;
  double mapping_accuracy = 0.0;
  int goals_claimed = 0;
  int goals_total = 0;
  bool complete = false;
  std::vector<TurnRecord> turns;
};

/// A camera frame delivered to the operator, with the robot path it covers.
struct Frame {
  Observation observation;
  std::vector<Cell> path;
  bool streamed = false;  ///< continuous video rather than a deliberate transmission
};

/// Operator input recorded for replay.
struct HumanInput {
  enum class Kind : std::uint8_t { MapEdit, Guidance };
  Kind kind = Kind::Guidance;
  EditMask edit;
  Guidance guidance;
  int turn = 0;  ///< robot turns completed when the input arrived
};

std::unique_ptr<PerceptionModel> make_model(const ModelSpec& spec, const SynthHumanConfig& human);

/// One discrete-world episode as a turn-based state machine. The robot acts
/// in robot_turn(); the operator (synthetic, live or replayed) consumes
/// frames, edits its map and answers guidance requests.
class Episode {
 public:
  enum class Phase : std::uint8_t { AwaitingGuidance, RobotTurn, Finished };

  Episode(const EpisodeConfig& config, const PerceptionModel* model);
  /// Uses `maze` instead of generating one from the seed.
  Episode(const EpisodeConfig& config, const PerceptionModel* model, GridMaze maze);

  Phase phase() const { return phase_; }
  const GridMaze& maze() const { return maze_; }
  RobotPose pose() const { return pose_; }
  const BeliefMap& human_map() const { return human_map_; }
  const KnowledgeGrid& knowledge() const { return knowledge_; }
  const std::vector<Cell>& unclaimed_goals() const { return unclaimed_; }
  const Guidance& guidance() const { return guidance_; }
  const EpisodeConfig& config() const { return config_; }

  /// Frames produced since the last call.
  std::vector<Frame> take_frames();

  void apply_map_edit(const EditMask& edit);
  /// Must be 4-connected and start at the robot's cell when non-empty.
  void submit_guidance(Guidance g);
  void robot_turn();

  const EpisodeMetrics& metrics() const { return metrics_; }
  const std::vector<HumanInput>& human_inputs() const { return inputs_; }

 private:
  void record(const std::string& kind, const std::string& detail);
  void move(Direction d);
  void emit_frame(Direction camera, std::vector<Cell> path, bool streamed);
  void finish(bool complete);
  void claim_if_goal();
  void check_budget();

  EpisodeConfig config_;
  const PerceptionModel* model_;
  GridMaze maze_;
  RobotPose pose_;
  BeliefMap human_map_;
  KnowledgeGrid knowledge_;
  std::vector<Cell> unclaimed_;
  Guidance guidance_;
  std::vector<Cell> since_comm_;
  Grid<std::uint8_t> visited_;
  Phase phase_ = Phase::AwaitingGuidance;
  std::vector<Frame> frames_;
  std::vector<HumanInput> inputs_;
  EpisodeMetrics metrics_;
  Rng planner_rng_;
  int turn_ = 0;
  int blocked_requests_ = 0;
};

/// The synthetic operator: updates its map on every frame with the
/// generator, then suggests its believed shortest path when asked. It also
/// remembers which cells it has seen as walls in a frame.
class SyntheticOperator {
 public:
  SyntheticOperator(const EpisodeConfig& config);
  /// Consumes pending frames and answers a guidance request if one is open.
  void respond(Episode& episode);

 private:
  SynthHumanConfig config_;
  Rng rng_;
  Grid<std::uint8_t> seen_wall_;
};

/// Shortest believed-free path to the nearest unclaimed goal; when the
/// belief disconnects the robot from every goal, the cheapest path that
/// crosses believed walls at a cost of 25 cells each, never through a cell
/// marked in `seen_wall`.
Guidance operator_guidance(const BeliefMap& belief, Cell robot, const std::vector<Cell>& goals,
                           const Grid<std::uint8_t>* seen_wall = nullptr);

/// Runs a whole episode with the synthetic operator.
EpisodeMetrics run_episode(const EpisodeConfig& config, const PerceptionModel* model = nullptr);

/// Replays recorded operator inputs in order instead of the synthetic
/// operator's decisions; frames are still produced but ignored. Running out
/// of inputs while the robot awaits guidance is an error unless `partial`,
/// in which case the metrics so far are returned.
EpisodeMetrics replay_episode(const EpisodeConfig& config, const std::vector<HumanInput>& inputs,
                              const PerceptionModel* model = nullptr, bool partial = false);

struct SuiteRow {
  std::uint64_t seed = 0;
  EpisodeMetrics metrics;
};

struct SuiteStat {
  double mean = 0.0;
  double stddev = 0.0;
};

struct SuiteReport {
  std::string policy;
  std::vector<SuiteRow> rows;
  SuiteStat steps, images, guidance, communication_mb, mapping_accuracy;
  int completed = 0;

  std::string to_json() const;
  std::string to_table() const;
};

SuiteReport run_suite(const EpisodeConfig& base, const std::vector<std::uint64_t>& seeds,
                      const PerceptionModel* model = nullptr);

std::string to_json(const EpisodeConfig& config);
EpisodeConfig episode_config_from_json(const std::string& text);
std::string metrics_to_json(const EpisodeMetrics& metrics);

}  // namespace conav
