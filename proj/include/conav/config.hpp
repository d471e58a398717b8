#pragma once

#include <filesystem>
#include <string>

#include "conav/bench.hpp"
#include "conav/continuous.hpp"
#include "conav/nhpm.hpp"

namespace conav {

// Versioned ("v": 1) JSON files whose keys mirror the struct field names.
// Missing keys keep their defaults; unknown keys are rejected.

std::string to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text);

std::string to_json(const DatasetConfig& config);
DatasetConfig dataset_config_from_json(const std::string& text);

std::string to_json(const ContinuousEpisodeConfig& config);
ContinuousEpisodeConfig continuous_config_from_json(const std::string& text);

std::string continuous_result_to_json(const ContinuousEpisodeResult& result);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace conav
