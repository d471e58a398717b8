#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>
#include <thread>

#include "bench/json_types.hpp"

namespace conav {

namespace {

using nlohmann::json;

SuiteStat stat_of(const std::vector<double>& xs) {
  SuiteStat s;
  if (xs.empty()) return s;
  for (const double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (const double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

json metrics_json(const EpisodeMetrics& m, bool with_turns) {
  json j = m;
  if (!with_turns) j.erase("turns");
  return j;
}

std::string pm(const SuiteStat& s, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f +- %.*f", precision, s.mean, precision, s.stddev);
  return buf;
}

}  // namespace

std::string metrics_to_json(const EpisodeMetrics& metrics) { return metrics_json(metrics, true).dump(2); }

std::string SuiteReport::to_json() const {
  json rows_j = json::array();
  for (const SuiteRow& r : rows) {
    json j = metrics_json(r.metrics, false);
    j["seed"] = r.seed;
    rows_j.push_back(std::move(j));
  }
  auto st = [](const SuiteStat& s) { return json{{"mean", s.mean}, {"std", s.stddev}}; };
  json out = {{"v", 1},
              {"policy", policy},
              {"episodes", rows.size()},
              {"completed", completed},
              {"rows", rows_j},
              {"summary",
               {{"steps", st(steps)},
                {"images", st(images)},
                {"guidance_instances", st(guidance)},
                {"communication_mb", st(communication_mb)},
                {"mapping_accuracy", st(mapping_accuracy)}}}};
  return out.dump(2);
}

std::string SuiteReport::to_table() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %10s %8s %8s %10s %9s %9s\n", "seed", "comm(MB)", "steps", "images",
                "guidance", "accuracy", "complete");
  os << line;
  for (const SuiteRow& r : rows) {
    const EpisodeMetrics& m = r.metrics;
    std::snprintf(line, sizeof line, "%-8llu %10.2f %8d %8d %10d %9.3f %9s\n",
                  static_cast<unsigned long long>(r.seed), m.communication_mb, m.steps, m.images,
                  m.guidance_instances, m.mapping_accuracy, m.complete ? "yes" : "no");
    os << line;
  }
  os << '\n';
  std::snprintf(line, sizeof line, "%-22s %-22s %-22s %-20s\n", "Method", "Communication (MB)", "#Robot Step",
                "Guidance");
  os << line;
  std::snprintf(line, sizeof line, "%-22s %-22s %-22s %-20s\n", policy.c_str(), pm(communication_mb, 2).c_str(),
                pm(steps, 2).c_str(), pm(guidance, 2).c_str());
  os << line;
  std::snprintf(line, sizeof line, "completed %d/%zu, mapping accuracy %s\n", completed, rows.size(),
                pm(mapping_accuracy, 3).c_str());
  os << line;
  return os.str();
}

SuiteReport run_suite(const EpisodeConfig& base, const std::vector<std::uint64_t>& seeds,
                      const PerceptionModel* model) {
  if (seeds.empty()) throw Error(ErrorCode::InvalidArgument, "a suite needs at least one seed");
  base.validate();
  std::unique_ptr<PerceptionModel> owned;
  if (model == nullptr && base.policy == PolicyKind::IgMcts) {
    owned = make_model(base.model, base.synthetic_human);
    model = owned.get();
  }

  SuiteReport report;
  report.policy = to_string(base.policy);
  report.rows.resize(seeds.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(seeds.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      EpisodeConfig c = base;
      c.seed = seeds[i];
      try {
        report.rows[i] = {seeds[i], run_episode(c, model)};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, seeds.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<double> st, im, gu, mb, acc;
  for (const SuiteRow& r : report.rows) {
    st.push_back(r.metrics.steps);
    im.push_back(r.metrics.images);
    gu.push_back(r.metrics.guidance_instances);
    mb.push_back(r.metrics.communication_mb);
    acc.push_back(r.metrics.mapping_accuracy);
    report.completed += r.metrics.complete;
  }
  report.steps = stat_of(st);
  report.images = stat_of(im);
  report.guidance = stat_of(gu);
  report.communication_mb = stat_of(mb);
  report.mapping_accuracy = stat_of(acc);
  return report;
}

json config_to_json(const EpisodeConfig& c) {
  json j = {{"v", 1},
            {"world", to_string(c.world)},
            {"seed", c.seed},
            {"policy", to_string(c.policy)},
            {"human", to_string(c.human)},
            {"step_budget", c.step_budget},
            {"mb_per_image", c.mb_per_image},
            {"maze_size", c.maze_size},
            {"corruption", c.corruption},
            {"knowledge_radius", c.knowledge_radius},
            {"max_guidance_retries", c.max_guidance_retries},
            {"camera", c.camera},
            {"synthetic_human", c.synthetic_human},
            {"mcts", c.mcts},
            {"rewards", c.rewards},
            {"model", c.model}};
  return j;
}

std::string to_json(const EpisodeConfig& c) { return config_to_json(c).dump(2); }

EpisodeConfig episode_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfiguration, e.what());
  }
  return config_from_json(j);
}

EpisodeConfig config_from_json(const json& j) {
  static const char* const kKeys[] = {"v",          "world",          "seed",
                                      "policy",     "human",          "step_budget",
                                      "mb_per_image", "maze_size",    "corruption",
                                      "knowledge_radius", "max_guidance_retries", "camera",
                                      "synthetic_human", "mcts",      "rewards",
                                      "model"};
  EpisodeConfig c;
  try {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfiguration, "config must be a JSON object");
    if (j.value("v", 1) != 1) throw Error(ErrorCode::InvalidConfiguration, "unsupported config version");
    for (const auto& [key, _] : j.items()) {
      if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char* k) { return key == k; }) ==
          std::end(kKeys)) {
        throw Error(ErrorCode::InvalidConfiguration, "unknown config key '" + key + "'");
      }
    }
    if (j.contains("world")) c.world = world_from_string(j["world"].get<std::string>());
    if (j.contains("policy")) c.policy = policy_from_string(j["policy"].get<std::string>());
    if (j.contains("human")) c.human = human_from_string(j["human"].get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.step_budget = j.value("step_budget", c.step_budget);
    c.mb_per_image = j.value("mb_per_image", c.mb_per_image);
    c.maze_size = j.value("maze_size", c.maze_size);
    c.corruption = j.value("corruption", c.corruption);
    c.knowledge_radius = j.value("knowledge_radius", c.knowledge_radius);
    c.max_guidance_retries = j.value("max_guidance_retries", c.max_guidance_retries);
    if (j.contains("camera")) c.camera = j["camera"].get<VisibilityConfig>();
    if (j.contains("synthetic_human")) c.synthetic_human = j["synthetic_human"].get<SynthHumanConfig>();
    if (j.contains("mcts")) c.mcts = j["mcts"].get<MctsConfig>();
    if (j.contains("rewards")) c.rewards = j["rewards"].get<RewardConfig>();
    if (j.contains("model")) c.model = j["model"].get<ModelSpec>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfiguration, e.what());
  }
  c.validate();
  return c;
}

}  // namespace conav
