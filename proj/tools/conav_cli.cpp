#include <atomic>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "conav/config.hpp"
#include "conav/server.hpp"

using namespace conav;
namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  std::string policy;
  std::string world = "discrete";
};

void add_common(CLI::App* app, Common& c, bool with_policy, bool with_world) {
  app->add_option("--seed", c.seed, "random seed");
  app->add_option("--config", c.config, "JSON config file");
  app->add_option("--out", c.out, "output path");
  if (with_policy) app->add_option("--policy", c.policy, "robot policy");
  if (with_world) {
    app->add_option("--world", c.world, "discrete | continuous")->check(CLI::IsMember({"discrete", "continuous"}));
  }
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text << '\n';
  } else {
    write_text_file(out, text + "\n");
  }
}

EpisodeConfig discrete_config(const Common& c) {
  EpisodeConfig cfg = c.config.empty() ? EpisodeConfig{} : episode_config_from_json(read_text_file(c.config));
  if (c.seed) cfg.seed = *c.seed;
  if (!c.policy.empty()) cfg.policy = policy_from_string(c.policy);
  cfg.validate();
  return cfg;
}

ContinuousEpisodeConfig continuous_config(const Common& c) {
  ContinuousEpisodeConfig cfg =
      c.config.empty() ? ContinuousEpisodeConfig{} : continuous_config_from_json(read_text_file(c.config));
  if (c.seed) cfg.seed = *c.seed;
  if (!c.policy.empty()) cfg.policy = continuous_policy_from_string(c.policy);
  return cfg;
}

struct ContinuousWorld {
  TerrainMap terrain;
  BeliefMap human_map;
};

ContinuousWorld make_world(bool showcase, std::uint64_t seed, int discs) {
  if (showcase) {
    Showcase s = dead_end_showcase();
    return {std::move(s.terrain), std::move(s.human_map)};
  }
  ContinuousWorld w{generate_terrain(seed), {}};
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  w.human_map = perturbed_belief(w.terrain, discs, 3, rng);
  return w;
}

Grid<std::uint8_t> wall_mask(const LabelGrid& labels) {
  Grid<std::uint8_t> m(labels.height(), labels.width(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) m.data()[i] = labels.data()[i] == CellLabel::Wall;
  return m;
}

void summarize(const std::string& policy, const ContinuousEpisodeResult& r) {
  std::printf("%-10s reached=%d path=%.1f px hops=%d bumps=%d communications=%d\n", policy.c_str(),
              r.reached_goal ? 1 : 0, r.path_length, r.hops, r.bumps, r.communications);
}

std::vector<Example> examples_for(const std::vector<Segment>& data, Architecture arch, std::uint64_t seed) {
  if (arch == Architecture::DiscreteFcn) return make_examples(data);
  Rng rng(seed);
  std::vector<Example> out;
  out.reserve(data.size());
  for (const Segment& s : data) {
    auto [input, label] = augment_continuous(s, rng);
    out.push_back({std::move(input), std::move(label)});
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperative navigation planner, human perception model and benchmarks"};
  app.require_subcommand(1);

  Common gen;
  int mazes = 2000;
  std::string events;
  auto* gen_cmd = app.add_subcommand("gen-data", "simulate synthetic operator mapping episodes into a dataset");
  add_common(gen_cmd, gen, false, false);
  gen_cmd->add_option("--mazes", mazes, "number of mazes")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--events", events, "also write the per-communication log as JSON");

  Common tr;
  std::string train_data;
  std::optional<int> epochs;
  auto* train_cmd = app.add_subcommand("train", "train a perception model from a dataset");
  add_common(train_cmd, tr, false, true);
  train_cmd->add_option("--data", train_data, "dataset file")->required();
  train_cmd->add_option("--epochs", epochs, "override max_epochs")->check(CLI::PositiveNumber);

  Common ev;
  std::string eval_data, checkpoint, fit_data;
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint against the fitted baseline and the Bayes floor");
  add_common(eval_cmd, ev, false, true);
  eval_cmd->add_option("--data", eval_data, "test dataset")->required();
  eval_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  eval_cmd->add_option("--fit-data", fit_data, "dataset the baseline is fitted on (default: the test set)");

  Common ep;
  bool showcase = false;
  int discs = 6;
  auto* episode_cmd = app.add_subcommand("episode", "run one episode with the synthetic operator");
  add_common(episode_cmd, ep, true, true);
  episode_cmd->add_flag("--showcase", showcase, "continuous: use the dead-end terrain");
  episode_cmd->add_option("--errors", discs, "continuous: operator map error discs")->check(CLI::NonNegativeNumber);

  Common su;
  int count = 10;
  auto* suite_cmd = app.add_subcommand("suite", "run consecutive seeds and report mean and standard deviation");
  add_common(suite_cmd, su, true, false);
  suite_cmd->add_option("--count", count, "number of seeds")->check(CLI::PositiveNumber);

  unsigned short port = 8765;
  std::string log_dir;
  auto* serve_cmd = app.add_subcommand("serve", "host live operator sessions over websocket");
  serve_cmd->add_option("--port", port, "listen port (0 picks one)");
  serve_cmd->add_option("--log-dir", log_dir, "directory for per-session logs");

  Common td;
  bool td_showcase = false;
  int td_discs = 6;
  auto* demo_cmd = app.add_subcommand("terrain-demo", "continuous terrain: export rasters and graph, run both policies");
  add_common(demo_cmd, td, true, false);
  demo_cmd->add_flag("--showcase", td_showcase, "use the dead-end terrain");
  demo_cmd->add_option("--errors", td_discs, "operator map error discs")->check(CLI::NonNegativeNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_cmd->parsed()) {
      if (gen.out.empty()) throw Error(ErrorCode::InvalidArgument, "gen-data needs --out");
      const DatasetConfig cfg = gen.config.empty() ? DatasetConfig{} : dataset_config_from_json(read_text_file(gen.config));
      std::vector<CommunicationEvent> log;
      const std::vector<Segment> data = generate_dataset(mazes, cfg, gen.seed.value_or(1), events.empty() ? nullptr : &log);
      save_dataset(data, gen.out);
      if (!events.empty()) {
        nlohmann::json j = nlohmann::json::array();
        for (const CommunicationEvent& e : log) {
          j.push_back({{"maze", e.maze_index}, {"maze_seed", e.maze_seed}, {"event", e.event},
                       {"camera", {e.camera.cell.row, e.camera.cell.col}}, {"heading", std::string(1, direction_letter(e.camera.heading))},
                       {"path_length", e.path_length}, {"visible", e.visible}, {"edits", e.edits},
                       {"accuracy_before", e.accuracy_before}, {"accuracy_after", e.accuracy_after}});
        }
        write_text_file(events, j.dump(2) + "\n");
      }
      std::printf("%zu segments from %d mazes -> %s\n", data.size(), mazes, gen.out.c_str());
    } else if (train_cmd->parsed()) {
      if (tr.out.empty()) throw Error(ErrorCode::InvalidArgument, "train needs --out");
      TrainConfig cfg;
      if (!tr.config.empty()) {
        cfg = train_config_from_json(read_text_file(tr.config));
      } else if (tr.world == "continuous") {
        cfg = TrainConfig::continuous_defaults();
      }
      if (tr.seed) cfg.seed = *tr.seed;
      if (epochs) cfg.max_epochs = *epochs;
      const std::vector<Segment> data = load_dataset(train_data);
      const TrainResult r = train(examples_for(data, cfg.architecture, cfg.seed), cfg);
      for (const EpochStats& s : r.history) {
        std::printf("epoch %4d train %.6f validation %.6f\n", s.epoch, s.train_loss, s.validation_loss);
      }
      save_checkpoint(r.params, tr.out);
      std::printf("best epoch %d validation %.6f -> %s\n", r.best_epoch, r.best_validation_loss, tr.out.c_str());
    } else if (eval_cmd->parsed()) {
      const ConvModelParams params = load_checkpoint(checkpoint);
      const std::vector<Segment> test = load_dataset(eval_data);
      const std::vector<Segment> fit_set = fit_data.empty() ? test : load_dataset(fit_data);
      const EvalConfig ecfg;
      const EvalResult nhpm = evaluate(params, examples_for(test, params.architecture, ev.seed.value_or(1)), ecfg);
      const GlpfFitResult fit = glpf_fit(fit_set);
      const EvalResult glpf = evaluate_glpf(fit.params, test, ecfg);
      const double floor = bayes_floor(test, SynthHumanConfig{});
      nlohmann::json j = {{"v", 1},
                          {"segments", test.size()},
                          {"nhpm", {{"mbce", nhpm.mbce}, {"thresholds", nhpm.thresholds}, {"iou", nhpm.iou}}},
                          {"glpf", {{"mbce", glpf.mbce}, {"iou", glpf.iou}}},
                          {"bayes_floor", floor}};
      std::printf("MBCE nhpm %.6f  glpf %.6f  bayes floor %.6f  (nhpm / floor %.3f)\n", nhpm.mbce, glpf.mbce, floor,
                  nhpm.mbce / floor);
      if (!ev.out.empty()) write_text_file(ev.out, j.dump(2) + "\n");
    } else if (episode_cmd->parsed()) {
      if (ep.world == "discrete") {
        emit(metrics_to_json(run_episode(discrete_config(ep))), ep.out);
      } else {
        const ContinuousEpisodeConfig cfg = continuous_config(ep);
        const ContinuousWorld w = make_world(showcase, cfg.seed, discs);
        const ContinuousEpisodeResult r = run_continuous_episode(w.terrain, w.human_map, cfg);
        summarize(to_string(cfg.policy), r);
        if (!ep.out.empty()) write_text_file(ep.out, continuous_result_to_json(r) + "\n");
      }
    } else if (suite_cmd->parsed()) {
      const EpisodeConfig cfg = discrete_config(su);
      std::vector<std::uint64_t> seeds;
      for (int i = 0; i < count; ++i) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));
      const SuiteReport report = run_suite(cfg, seeds);
      std::cout << report.to_table();
      if (!su.out.empty()) {
        const fs::path json_path = su.out;
        write_text_file(json_path, report.to_json() + "\n");
        fs::path table_path = json_path;
        table_path.replace_extension(".txt");
        write_text_file(table_path, report.to_table());
      }
    } else if (serve_cmd->parsed()) {
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      ServerOptions options;
      options.log_dir = log_dir;
      serve(port, options, g_stop, [](unsigned short p) {
        std::printf("listening on port %u\n", static_cast<unsigned>(p));
        std::fflush(stdout);
      });
    } else if (demo_cmd->parsed()) {
      const fs::path dir = td.out.empty() ? fs::path("terrain-demo") : fs::path(td.out);
      fs::create_directories(dir);
      ContinuousEpisodeConfig cfg = continuous_config(td);
      const ContinuousWorld w = make_world(td_showcase, cfg.seed, td_discs);
      write_pgm(dir / "height.pgm", w.terrain.height);
      write_pbm(dir / "obstacles.pbm", wall_mask(w.terrain.labels()));
      write_pbm(dir / "operator_map.pbm", wall_mask(w.human_map.labels));
      std::vector<ContinuousPolicy> policies{ContinuousPolicy::GreedyBfs, ContinuousPolicy::IgMcts};
      if (!td.policy.empty()) policies = {continuous_policy_from_string(td.policy)};
      for (const ContinuousPolicy p : policies) {
        cfg.policy = p;
        const ContinuousEpisodeResult r = run_continuous_episode(w.terrain, w.human_map, cfg);
        summarize(to_string(p), r);
        write_text_file(dir / (to_string(p) + ".json"), continuous_result_to_json(r) + "\n");
        write_text_file(dir / (to_string(p) + "_graph.json"), r.graph.to_json() + "\n");
        write_pbm(dir / (to_string(p) + "_knowledge.pbm"), wall_mask(r.knowledge.labels));
      }
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
