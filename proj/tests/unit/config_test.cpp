#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "conav/config.hpp"

using namespace conav;

TEST_CASE("train config json") {
  TrainConfig c;
  c.learning_rate = 0.02;
  c.optimizer = Optimizer::Sgd;
  c.momentum = 0.9;
  c.seed = 77;
  const TrainConfig back = train_config_from_json(to_json(c));
  CHECK(back.learning_rate == 0.02);
  CHECK(back.optimizer == Optimizer::Sgd);
  CHECK(back.momentum == 0.9);
  CHECK(back.seed == 77);
  CHECK(to_json(back) == to_json(c));

  const TrainConfig cont = train_config_from_json(R"({"v": 1, "architecture": "continuous-encdec", "max_epochs": 3})");
  CHECK(cont.architecture == Architecture::ContinuousEncDec);
  CHECK(cont.max_epochs == 3);
  CHECK(cont.micro_batch == TrainConfig::continuous_defaults().micro_batch);
  CHECK(cont.positive_weight == TrainConfig::continuous_defaults().positive_weight);

  CHECK_THROWS_AS(train_config_from_json(R"({"learning_rat": 0.1})"), Error);
  CHECK_THROWS_AS(train_config_from_json(R"({"learning_rate": -1})"), Error);
  CHECK_THROWS_AS(train_config_from_json(R"({"architecture": "transformer"})"), Error);
  CHECK_THROWS_AS(train_config_from_json(R"([1, 2])"), Error);
}

TEST_CASE("dataset config json") {
  DatasetConfig c;
  c.maze_size = 15;
  c.corruption = 0.3;
  const DatasetConfig back = dataset_config_from_json(to_json(c));
  CHECK(back.maze_size == 15);
  CHECK(back.corruption == 0.3);
  CHECK(to_json(back) == to_json(c));

  CHECK_THROWS_AS(dataset_config_from_json(R"({"maze_size": 14})"), Error);
  CHECK_THROWS_AS(dataset_config_from_json(R"({"corruption": 1.5})"), Error);
  CHECK_THROWS_AS(dataset_config_from_json(R"({"v": 3})"), Error);
}

TEST_CASE("continuous config json") {
  ContinuousEpisodeConfig c;
  c.policy = ContinuousPolicy::GreedyBfs;
  c.seed = 12;
  c.mcts.iterations = 55;
  c.seeds.count = 90;
  c.comm_cost = 3.0;
  const ContinuousEpisodeConfig back = continuous_config_from_json(to_json(c));
  CHECK(back.policy == ContinuousPolicy::GreedyBfs);
  CHECK(back.seed == 12);
  CHECK(back.mcts.iterations == 55);
  CHECK(back.seeds.count == 90);
  CHECK(back.comm_cost == 3.0);
  CHECK(to_json(back) == to_json(c));

  const ContinuousEpisodeConfig partial = continuous_config_from_json(R"({"v": 1, "seeds": {"count": 40}})");
  CHECK(partial.seeds.count == 40);
  CHECK(partial.seeds.min_spacing == SeedConfig{}.min_spacing);

  CHECK_THROWS_AS(continuous_config_from_json(R"({"comm_cost": -1})"), Error);
  CHECK_THROWS_AS(continuous_config_from_json(R"({"max_turns": 0})"), Error);
  CHECK_THROWS_AS(continuous_config_from_json(R"({"policy": "teleport"})"), Error);
  CHECK_THROWS_AS(continuous_config_from_json(R"({"seeds": {"count": "many"}})"), Error);
}

TEST_CASE("text files") {
  const auto path = std::filesystem::temp_directory_path() / "conav_config_test" / "nested" / "c.json";
  std::filesystem::remove_all(path.parent_path().parent_path());
  write_text_file(path, "{\"v\": 1}\n");
  CHECK(read_text_file(path) == "{\"v\": 1}\n");
  CHECK_THROWS_AS(read_text_file(path.parent_path() / "missing.json"), Error);
  std::filesystem::remove_all(path.parent_path().parent_path());
}

TEST_CASE("perturbed operator map") {
  const TerrainMap terrain = generate_terrain(4);
  const LabelGrid truth = terrain.labels();

  Rng none(1);
  const BeliefMap exact = perturbed_belief(terrain, 0, 6, none);
  CHECK_FALSE(exact.fixed_border);
  CHECK(exact.labels.data() == truth.data());

  const int radius = 6;
  Rng a(9), b(9);
  const BeliefMap p = perturbed_belief(terrain, 5, radius, a);
  CHECK(p.labels.data() == perturbed_belief(terrain, 5, radius, b).labels.data());

  int flipped = 0;
  for (int r = 0; r < truth.height(); ++r) {
    for (int c = 0; c < truth.width(); ++c) {
      if (p.labels.at(r, c) == truth.at(r, c)) continue;
      ++flipped;
      CHECK(p.labels.at(r, c) != CellLabel::Unknown);
      // a disc centre is more than 2r+1 from start and goal, so its pixels stay beyond r+1
      CHECK(std::hypot(r - terrain.start.row, c - terrain.start.col) > radius + 1.0);
      CHECK(std::hypot(r - terrain.goal.row, c - terrain.goal.col) > radius + 1.0);
    }
  }
  CHECK(flipped > 0);
  CHECK(flipped <= 5 * (2 * radius + 1) * (2 * radius + 1));

  Rng bad(1);
  CHECK_THROWS_AS(perturbed_belief(terrain, -1, 3, bad), Error);
}
