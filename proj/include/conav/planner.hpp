#pragma once

#include <cmath>
#include <memory>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "conav/belief.hpp"
#include "conav/grid_world.hpp"
#include "conav/mcts.hpp"
#include "conav/nhpm.hpp"
#include "conav/synth_human.hpp"

namespace conav {

struct RewardConfig {
  double goal_reward = 100.0;  ///< r_g
  double step_penalty = -1.0;
  double comm_base_cost = 10.0;

  void validate() const;
};

template <class S>
bool contains(const std::vector<S>& xs, const S& x) {
  for (const S& y : xs)
    if (y == x) return true;
  return false;
}

/// r_g when the last state is a goal from `goals` not already visited
/// earlier in tau, else the step penalty.
template <class S>
double r_env(const std::vector<S>& tau, const std::vector<S>& goals, const RewardConfig& rewards) {
  if (tau.empty()) throw Error(ErrorCode::InvalidArgument, "empty state history");
  const S& last = tau.back();
  if (contains(goals, last)) {
    for (std::size_t i = 0; i + 1 < tau.size(); ++i)
      if (tau[i] == last) return rewards.step_penalty;
    return rewards.goal_reward;
  }
  return rewards.step_penalty;
}

/// 0 on the guidance path, otherwise -ln |tau|.
template <class S>
double r_guidance(const std::vector<S>& tau, const std::vector<S>& zeta) {
  if (tau.empty()) throw Error(ErrorCode::InvalidArgument, "empty state history");
  if (contains(zeta, tau.back())) return 0.0;
  return -std::log(static_cast<double>(tau.size()));
}

/// Minus the number of earlier occurrences of the last state.
template <class S>
double r_smooth(const std::vector<S>& tau) {
  if (tau.empty()) throw Error(ErrorCode::InvalidArgument, "empty state history");
  int repeats = 0;
  for (std::size_t i = 0; i + 1 < tau.size(); ++i) repeats += tau[i] == tau.back();
  return -static_cast<double>(repeats);
}

template <class S>
double task_reward(const std::vector<S>& tau, const std::vector<S>& goals, const std::vector<S>& zeta,
                   const RewardConfig& rewards) {
  return r_env(tau, goals, rewards) + r_guidance(tau, zeta) + r_smooth(tau);
}

/// Base cost plus the number of guidance states not yet visited.
template <class S, class Visited>
double comm_cost(const std::vector<S>& zeta, Visited&& visited, const RewardConfig& rewards) {
  int unvisited = 0;
  for (const S& s : zeta) unvisited += !visited(s);
  return rewards.comm_base_cost + unvisited;
}

/// Predicts the operator's edit probabilities after a transmission.
class PerceptionModel {
 public:
  virtual ~PerceptionModel() = default;
  virtual EditProbabilities predict(const BeliefMap& belief, const std::vector<Cell>& path,
                                    const Observation& obs) const = 0;
};

class NhpmPerception : public PerceptionModel {
 public:
  /// `symmetrized` averages over the eight dihedral transforms (predict);
  /// otherwise a single forward pass.
  explicit NhpmPerception(ConvModelParams params, bool symmetrized = false);
  EditProbabilities predict(const BeliefMap& belief, const std::vector<Cell>& path,
                            const Observation& obs) const override;

 private:
  ConvModelParams params_;
  bool symmetrized_;
};

class GlpfPerception : public PerceptionModel {
 public:
  explicit GlpfPerception(GlpfParams params);
  EditProbabilities predict(const BeliefMap& belief, const std::vector<Cell>& path,
                            const Observation& obs) const override;

 private:
  GlpfParams params_;
};

/// The synthetic operator's exact probabilities.
class SynthPerception : public PerceptionModel {
 public:
  explicit SynthPerception(SynthHumanConfig config);
  EditProbabilities predict(const BeliefMap& belief, const std::vector<Cell>& path,
                            const Observation& obs) const override;

 private:
  SynthHumanConfig config_;
};

/// The operator's map after the maximum-likelihood edit (probabilities >= 0.5).
BeliefMap expected_update(const BeliefMap& belief, const EditProbabilities& probs);

/// What the robot expects a camera at `camera` to capture given its own
/// knowledge: rays pass through Unknown cells, which are then left out.
Observation predicted_observation(const KnowledgeGrid& knowledge, RobotPose camera,
                                  const VisibilityConfig& config = {});

/// Everything the discrete planner needs to know at one decision.
struct GridPlanningContext {
  const KnowledgeGrid* knowledge = nullptr;
  std::vector<Cell> goals;  ///< unclaimed goals
  Guidance guidance;
  std::vector<Cell> history;                 ///< tau since the last communication, ending at the robot
  std::shared_ptr<const BeliefMap> belief;   ///< x
  Grid<std::uint8_t> episode_visited;        ///< every cell visited this episode
  const PerceptionModel* model = nullptr;
  RewardConfig rewards;
  VisibilityConfig camera;
  bool communication_enabled = true;
};

struct GridState {
  std::vector<Cell> tau;
  std::shared_ptr<const BeliefMap> belief;
  bool goal_reached = false;
  bool communicated = false;
};

/// Action indices follow Action::index: moves N,E,S,W = 0..3, then
/// communications N,E,S,W = 4..7.
class GridPlanningDomain {
 public:
  explicit GridPlanningDomain(const GridPlanningContext& context);

  std::vector<int> actions(const GridState& s) const;
  bool terminal(const GridState& s) const { return s.goal_reached; }
  Expansion<GridState> expand(const GridState& s, int action) const;
  RolloutResult rollout(const GridState& s, int depth_budget, double discount, Rng& rng) const;

  /// Expected information gain minus communication cost, and the resulting
  /// maximum-likelihood operator map.
  struct CommOutcome {
    double gain = 0.0;
    double cost = 0.0;
    std::shared_ptr<const BeliefMap> belief;
  };
  CommOutcome communicate(const GridState& s, Direction camera) const;

  GridState root_state() const;

 private:
  double move_reward(const std::vector<Cell>& tau) const;
  bool is_goal(Cell c) const;

  const GridPlanningContext& ctx_;
  mutable std::unordered_map<std::string, CommOutcome> cache_;
};

/// One IG-MCTS decision for the discrete world.
Action plan_grid(const GridPlanningContext& context, const MctsConfig& config, Rng& rng,
                 std::ostream* trace = nullptr);

}  // namespace conav
