#include "conav/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "bench/json_types.hpp"

namespace conav {

using nlohmann::json;

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SeedConfig, count, boundary_fraction, min_spacing, boundary_band)

namespace {

json parse_versioned(const std::string& text, std::initializer_list<const char*> keys) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfiguration, e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfiguration, "config must be a JSON object");
  if (j.value("v", 1) != 1) throw Error(ErrorCode::InvalidConfiguration, "unsupported config version");
  for (const auto& [key, _] : j.items()) {
    bool known = key == "v";
    for (const char* k : keys) known = known || key == k;
    if (!known) throw Error(ErrorCode::InvalidConfiguration, "unknown config key '" + key + "'");
  }
  return j;
}

template <class F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfiguration, e.what());
  }
}

json cells_json(const std::vector<Cell>& cells) {
  json out = json::array();
  for (const Cell c : cells) out.push_back({c.row, c.col});
  return out;
}

}  // namespace

std::string to_json(const TrainConfig& c) {
  return json{{"v", 1},
              {"architecture", to_string(c.architecture)},
              {"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},
              {"max_epochs", c.max_epochs},
              {"positive_weight", c.positive_weight},
              {"validation_fraction", c.validation_fraction},
              {"augment", c.augment},
              {"optimizer", to_string(c.optimizer)},
              {"momentum", c.momentum},
              {"clip_norm", c.clip_norm},
              {"patience", c.patience},
              {"micro_batch", c.micro_batch},
              {"ema_decay", c.ema_decay},
              {"seed", c.seed}}
      .dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  const json j = parse_versioned(text, {"architecture", "learning_rate", "batch_size", "max_epochs",
                                        "positive_weight", "validation_fraction", "augment", "optimizer",
                                        "momentum", "clip_norm", "patience", "micro_batch", "ema_decay", "seed"});
  TrainConfig c = guarded([&] {
    TrainConfig t;
    if (j.contains("architecture")) {
      t = architecture_from_string(j["architecture"].get<std::string>()) == Architecture::ContinuousEncDec
              ? TrainConfig::continuous_defaults()
              : TrainConfig{};
    }
    t.learning_rate = j.value("learning_rate", t.learning_rate);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.max_epochs = j.value("max_epochs", t.max_epochs);
    t.positive_weight = j.value("positive_weight", t.positive_weight);
    t.validation_fraction = j.value("validation_fraction", t.validation_fraction);
    t.augment = j.value("augment", t.augment);
    if (j.contains("optimizer")) t.optimizer = optimizer_from_string(j["optimizer"].get<std::string>());
    t.momentum = j.value("momentum", t.momentum);
    t.clip_norm = j.value("clip_norm", t.clip_norm);
    t.patience = j.value("patience", t.patience);
    t.micro_batch = j.value("micro_batch", t.micro_batch);
    t.ema_decay = j.value("ema_decay", t.ema_decay);
    t.seed = j.value("seed", t.seed);
    return t;
  });
  c.validate();
  return c;
}

std::string to_json(const DatasetConfig& c) {
  return json{{"v", 1},
              {"maze_size", c.maze_size},
              {"corruption", c.corruption},
              {"stop_accuracy", c.stop_accuracy},
              {"max_communications", c.max_communications},
              {"human", c.human},
              {"camera", c.camera}}
      .dump(2);
}

DatasetConfig dataset_config_from_json(const std::string& text) {
  const json j =
      parse_versioned(text, {"maze_size", "corruption", "stop_accuracy", "max_communications", "human", "camera"});
  DatasetConfig c = guarded([&] {
    DatasetConfig d;
    d.maze_size = j.value("maze_size", d.maze_size);
    d.corruption = j.value("corruption", d.corruption);
    d.stop_accuracy = j.value("stop_accuracy", d.stop_accuracy);
    d.max_communications = j.value("max_communications", d.max_communications);
    if (j.contains("human")) d.human = j["human"].get<SynthHumanConfig>();
    if (j.contains("camera")) d.camera = j["camera"].get<VisibilityConfig>();
    return d;
  });
  if (c.maze_size < 5 || c.maze_size % 2 == 0 || !(c.corruption >= 0.0 && c.corruption <= 1.0) ||
      !(c.stop_accuracy > 0.0 && c.stop_accuracy <= 1.0) || c.max_communications < 1) {
    throw Error(ErrorCode::InvalidConfiguration, "invalid dataset configuration");
  }
  c.human.validate();
  return c;
}

std::string to_json(const ContinuousEpisodeConfig& c) {
  return json{{"v", 1},
              {"policy", to_string(c.policy)},
              {"seed", c.seed},
              {"mcts", c.mcts},
              {"rewards", c.rewards},
              {"seeds", c.seeds},
              {"human", c.human},
              {"comm_cost", c.comm_cost},
              {"max_turns", c.max_turns}}
      .dump(2);
}

ContinuousEpisodeConfig continuous_config_from_json(const std::string& text) {
  const json j =
      parse_versioned(text, {"policy", "seed", "mcts", "rewards", "seeds", "human", "comm_cost", "max_turns"});
  ContinuousEpisodeConfig c = guarded([&] {
    ContinuousEpisodeConfig e;
    if (j.contains("policy")) e.policy = continuous_policy_from_string(j["policy"].get<std::string>());
    e.seed = j.value("seed", e.seed);
    if (j.contains("mcts")) e.mcts = j["mcts"].get<MctsConfig>();
    if (j.contains("rewards")) e.rewards = j["rewards"].get<RewardConfig>();
    if (j.contains("seeds")) e.seeds = j["seeds"].get<SeedConfig>();
    if (j.contains("human")) e.human = j["human"].get<SynthHumanConfig>();
    e.comm_cost = j.value("comm_cost", e.comm_cost);
    e.max_turns = j.value("max_turns", e.max_turns);
    return e;
  });
  c.mcts.validate();
  c.seeds.validate();
  c.human.validate();
  if (!(c.comm_cost >= 0.0) || c.max_turns < 1) {
    throw Error(ErrorCode::InvalidConfiguration, "invalid continuous episode configuration");
  }
  return c;
}

std::string continuous_result_to_json(const ContinuousEpisodeResult& r) {
  json guidance = json::array();
  for (const auto& g : r.guidance) guidance.push_back(cells_json(g));
  return json{{"v", 1},
              {"reached_goal", r.reached_goal},
              {"path_length", r.path_length},
              {"hops", r.hops},
              {"bumps", r.bumps},
              {"communications", r.communications},
              {"trajectory", cells_json(r.trajectory)},
              {"guidance", std::move(guidance)}}
      .dump(2);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

}  // namespace conav
