#pragma once

#include <json.hpp>

#include "conav/bench.hpp"

namespace conav {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(VisibilityConfig, fov_degrees, range)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SynthHumanConfig, base_rate, decay, alignment_bonus, false_edit_rate)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(MctsConfig, iterations, exploration, discount, max_depth)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RewardConfig, goal_reward, step_penalty, comm_base_cost)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GlpfParams, guess, lapse, slope, midpoint, decay)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelSpec, kind, path, glpf, symmetrized)

inline void to_json(nlohmann::json& j, const Cell& c) { j = nlohmann::json::array({c.row, c.col}); }
inline void from_json(const nlohmann::json& j, Cell& c) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::InvalidArgument, "a cell is [row, col]");
  c = {j[0].get<int>(), j[1].get<int>()};
}

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TurnRecord, turn, step, kind, detail, cell)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EpisodeMetrics, steps, images, guidance_instances, communication_mb,
                                                mapping_accuracy, goals_claimed, goals_total, complete, turns)

nlohmann::json config_to_json(const EpisodeConfig& c);
EpisodeConfig config_from_json(const nlohmann::json& j);

}  // namespace conav
