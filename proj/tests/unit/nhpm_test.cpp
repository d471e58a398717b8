#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <filesystem>
#include <numbers>

#include "conav/nhpm.hpp"
#include "conav/synth_human.hpp"

using namespace conav;

namespace {

std::vector<Segment> small_dataset(int mazes, std::uint64_t seed) {
  return generate_dataset(mazes, DatasetConfig{}, seed);
}

Example random_example(int n, Rng& rng, bool fixed_border) {
  Example e{InputTensor(n, n), EditMask(n, n)};
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const bool wall = (fixed_border && (r == 0 || c == 0 || r == n - 1 || c == n - 1)) || rng.bernoulli(0.35);
      e.input.at(0, r, c) = wall;
      e.input.at(1, r, c) = rng.bernoulli(0.2);
      const bool vis = rng.bernoulli(0.4);
      e.input.at(2, r, c) = vis;
      e.input.at(3, r, c) = vis && rng.bernoulli(0.5);
      const bool editable = !(fixed_border && (r == 0 || c == 0 || r == n - 1 || c == n - 1));
      if (editable && rng.bernoulli(0.3)) (wall ? e.label.remove : e.label.add).at(r, c) = 1;
    }
  return e;
}

bool subset_invariant(const InputTensor& t) {
  for (int r = 0; r < t.height; ++r)
    for (int c = 0; c < t.width; ++c)
      if (t.at(3, r, c) > t.at(2, r, c)) return false;
  return true;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("conav_nhpm_test_" + name);
}

}  // namespace

TEST_CASE("encode") {
  const GridMaze maze = generate_maze(9, 13);
  Segment s;
  s.before = BeliefMap::from_maze(maze);
  s.after = s.before;
  s.path = {maze.start};
  s.observation.camera = {maze.start, Direction::North};

  SUBCASE("empty observation and single-cell path") {
    const InputTensor t = encode(s);
    double vis = 0.0, path = 0.0;
    for (int r = 0; r < 13; ++r)
      for (int c = 0; c < 13; ++c) {
        vis += t.at(2, r, c) + t.at(3, r, c);
        path += t.at(1, r, c);
        CHECK(t.at(0, r, c) == (maze.is_wall({r, c}) ? 1.0f : 0.0f));
      }
    CHECK(vis == 0.0);
    CHECK(path == 1.0);
    CHECK(t.at(1, maze.start.row, maze.start.col) == 1.0f);
  }
  SUBCASE("decode recovers the observation") {
    for (const Direction d : kDirections) {
      s.observation = visible_cells(maze, {maze.start, d});
      const InputTensor t = encode(s);
      CHECK(subset_invariant(t));
      const DecodedObservation o = decode_observation(t);
      std::vector<std::pair<Cell, CellLabel>> expected;
      for (std::size_t i = 0; i < s.observation.visible.size(); ++i)
        expected.emplace_back(s.observation.visible[i], s.observation.labels[i]);
      std::sort(expected.begin(), expected.end(), [](const auto& x, const auto& y) {
        return std::pair(x.first.row, x.first.col) < std::pair(y.first.row, y.first.col);
      });
      REQUIRE(o.visible.size() == expected.size());
      for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(o.visible[i] == expected[i].first);
        CHECK(o.labels[i] == expected[i].second);
      }
      CHECK(decode_belief(t, true) == s.before);
    }
  }
  SUBCASE("invalid segments are rejected") {
    Segment bad = s;
    bad.after = BeliefMap(LabelGrid(5, 5));
    CHECK_THROWS_AS(encode(bad), Error);
    bad = s;
    bad.path.clear();
    CHECK_THROWS_AS(encode(bad), Error);
    bad = s;
    bad.path = {{1, 1}, {1, 2}};
    bad.observation.camera.cell = {1, 1};
    CHECK_THROWS_AS(encode(bad), Error);
  }
}

TEST_CASE("dihedral group") {
  for (const Dihedral g : kDihedrals) {
    CHECK(compose(g, inverse(g)) == Dihedral::Identity);
    for (const Dihedral h : kDihedrals) {
      const Dihedral gh = compose(g, h);
      for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c) CHECK(apply(gh, {r, c}, 5) == apply(g, apply(h, {r, c}, 5), 5));
    }
  }
}

TEST_CASE("augment_discrete") {
  Rng rng(4);
  const Example e = random_example(13, rng, true);
  const auto same = augment_discrete(e.input, e.label, Dihedral::Identity);
  CHECK(same.first == e.input);
  CHECK(same.second == e.label);

  auto r = std::make_pair(e.input, e.label);
  for (int i = 0; i < 4; ++i) r = augment_discrete(r.first, r.second, Dihedral::Rot90);
  CHECK(r.first == e.input);
  CHECK(r.second == e.label);

  for (const Dihedral flip : {Dihedral::FlipCols, Dihedral::FlipRows, Dihedral::Transpose}) {
    const auto once = augment_discrete(e.input, e.label, flip);
    CHECK_FALSE(once.first == e.input);
    const auto twice = augment_discrete(once.first, once.second, flip);
    CHECK(twice.first == e.input);
    CHECK(twice.second == e.label);
  }
  for (const Dihedral g : kDihedrals) {
    const auto there = augment_discrete(e.input, e.label, g);
    const auto back = augment_discrete(there.first, there.second, inverse(g));
    CHECK(back.first == e.input);
    CHECK(back.second == e.label);
  }
  CHECK_THROWS_AS(augment_discrete(InputTensor(3, 4), EditMask(3, 4), Dihedral::Rot90), Error);
}

TEST_CASE("augment_continuous") {
  const std::vector<Segment> data = small_dataset(2, 70);
  REQUIRE(data.size() >= 2);

  SUBCASE("pure upscale scales cell counts by the pixel footprint") {
    const Segment& s = data.front();
    const auto [t, y] = augment_continuous(s, ContinuousAugment{150, 0.0, false, false});
    // Pixels per source row/column: centres (i + 0.5) * 13 / 150 fall in that row.
    std::vector<int> span(13, 0);
    for (int i = 0; i < 150; ++i) ++span[static_cast<int>(std::floor((i + 0.5) * 13.0 / 150.0))];
    const InputTensor src = encode(s);
    const EditMask label = s.label();
    for (int ch = 0; ch < 4; ++ch) {
      double expected = 0.0, got = 0.0;
      for (int r = 0; r < 13; ++r)
        for (int c = 0; c < 13; ++c) expected += src.at(ch, r, c) * span[r] * span[c];
      for (const float v : std::vector<float>(t.data.begin() + ch * 22500, t.data.begin() + (ch + 1) * 22500)) got += v;
      CHECK(got == expected);
    }
    std::size_t expected_edits = 0;
    for (int r = 0; r < 13; ++r)
      for (int c = 0; c < 13; ++c)
        expected_edits += static_cast<std::size_t>(label.add.at(r, c) + label.remove.at(r, c)) * span[r] * span[c];
    CHECK(y.count() == expected_edits);
  }
  SUBCASE("random augmentations keep channel 4 inside channel 3 and labels binary") {
    Rng rng(12);
    for (const Segment& s : data) {
      const auto [t, y] = augment_continuous(s, rng);
      CHECK(t.height == 150);
      CHECK(subset_invariant(t));
      for (const float v : t.data) CHECK((v == 0.0f || v == 1.0f));
      for (std::size_t i = 0; i < y.add.size(); ++i) CHECK(!(y.add.data()[i] && y.remove.data()[i]));
    }
  }
  SUBCASE("seeded augmentation is reproducible") {
    Rng a(5), b(5);
    const auto x = augment_continuous(data[1], a);
    const auto z = augment_continuous(data[1], b);
    CHECK(x.first == z.first);
    CHECK(x.second == z.second);
  }
  SUBCASE("rotation by a quarter turn matches the discrete rotation") {
    const Segment& s = data.front();
    const auto quarter = augment_continuous(s, ContinuousAugment{130, std::numbers::pi / 2, false, false});
    const auto plain = augment_continuous(s, ContinuousAugment{130, 0.0, false, false});
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < quarter.first.data.size(); ++i) {
      a += quarter.first.data[i];
      b += plain.first.data[i];
    }
    CHECK(a == doctest::Approx(b).epsilon(0.02));
  }
}

TEST_CASE("forward") {
  const std::vector<Segment> data = small_dataset(1, 31);
  const InputTensor in = encode(data.front());

  SUBCASE("zero weights give one half on every editable entry") {
    const EditProbabilities p = forward(make_architecture(Architecture::DiscreteFcn), in);
    const BeliefMap b = data.front().before;
    for (int r = 0; r < 13; ++r)
      for (int c = 0; c < 13; ++c) {
        const Cell cell{r, c};
        const double expected_add = b.editable(cell) && !b.is_wall(cell) ? 0.5 : 0.0;
        const double expected_remove = b.editable(cell) && b.is_wall(cell) ? 0.5 : 0.0;
        CHECK(p.add[cell] == expected_add);
        CHECK(p.remove[cell] == expected_remove);
      }
  }
  SUBCASE("mask rule holds exactly for random weights") {
    Rng rng(2);
    const ConvModelParams params = init_params(Architecture::DiscreteFcn, rng);
    for (const Segment& s : data) {
      const EditProbabilities p = forward(params, encode(s));
      CHECK(satisfies_mask_rule(p, s.before));
      const EditProbabilities q = predict(params, encode(s));
      CHECK(satisfies_mask_rule(q, s.before));
    }
    InputTensor walls(13, 13);
    for (int r = 0; r < 13; ++r)
      for (int c = 0; c < 13; ++c) walls.at(0, r, c) = 1.0f;
    const EditProbabilities p = forward(params, walls);
    for (const double v : p.add.data()) CHECK(v == 0.0);
  }
  SUBCASE("translation away from the borders") {
    Rng rng(3);
    const ConvModelParams params = init_params(Architecture::DiscreteFcn, rng);
    InputTensor a(13, 13), b(13, 13);
    // A small free patch around (5,5); b is a shifted down by one row.
    for (int r = 3; r <= 7; ++r)
      for (int c = 3; c <= 7; ++c) {
        const float v = ((r * 7 + c * 3) % 5 == 0) ? 1.0f : 0.0f;
        a.at(2, r, c) = 1.0f;
        a.at(3, r, c) = v;
        b.at(2, r + 1, c) = 1.0f;
        b.at(3, r + 1, c) = v;
      }
    const EditProbabilities pa = forward(params, a);
    const EditProbabilities pb = forward(params, b);
    // Four 3x3 layers see four cells in every direction; stay clear of the padding.
    for (int r = 4; r <= 7; ++r)
      for (int c = 4; c <= 8; ++c) CHECK(pb.add.at(r + 1, c) == doctest::Approx(pa.add.at(r, c)).epsilon(1e-6));
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(forward(make_architecture(Architecture::DiscreteFcn), InputTensor(11, 11)), Error);
    CHECK_THROWS_AS(forward(make_architecture(Architecture::ContinuousEncDec, 16), InputTensor(13, 13)), Error);
  }
  SUBCASE("encoder-decoder resolution and bottleneck") {
    const ConvModelParams full = make_architecture(Architecture::ContinuousEncDec);
    CHECK(full.layers.size() == 13);
    CHECK(full.layers[6].out_channels == 64);
    CHECK(full.layers[7].upsample_to == 38);
    CHECK(full.layers[9].upsample_to == 75);
    CHECK(full.layers[11].upsample_to == 150);
    Rng rng(4);
    const ConvModelParams small = init_params(Architecture::ContinuousEncDec, rng, 20);
    const EditProbabilities p = forward(small, random_example(20, rng, false).input);
    CHECK(p.add.height() == 20);
    CHECK(p.add.width() == 20);
  }
}

TEST_CASE("loss") {
  BeliefMap b(LabelGrid(3, 3, CellLabel::Free), false);
  b.labels.at(1, 1) = CellLabel::Wall;
  EditMask y(3, 3);
  y.add.at(0, 0) = 1;
  y.remove.at(1, 1) = 1;

  SUBCASE("perfect probabilities") {
    EditProbabilities p(3, 3);
    p.add.at(0, 0) = 1.0;
    p.remove.at(1, 1) = 1.0;
    CHECK(loss(p, y, 1.0, b) <= -std::log(1.0 - kProbabilityEpsilon) + 1e-15);
  }
  SUBCASE("one half on balanced labels") {
    EditProbabilities p(3, 3);
    for (double& v : p.add.data()) v = 0.5;
    for (double& v : p.remove.data()) v = 0.5;
    BeliefMap two(LabelGrid(1, 2, CellLabel::Free), false);
    EditMask yy(1, 2);
    yy.add.at(0, 0) = 1;
    EditProbabilities pp(1, 2);
    pp.add.at(0, 0) = pp.add.at(0, 1) = 0.5;
    CHECK(loss(pp, yy, 1.0, two) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  }
  SUBCASE("class weight scales only the positive terms") {
    BeliefMap two(LabelGrid(1, 2, CellLabel::Free), false);
    EditMask yy(1, 2);
    yy.add.at(0, 0) = 1;
    EditProbabilities pp(1, 2);
    pp.add.at(0, 0) = 0.8;
    pp.add.at(0, 1) = 0.3;
    const double pos = -std::log(0.8), neg = -std::log(0.7);
    CHECK(loss(pp, yy, 1.0, two) == doctest::Approx((pos + neg) / 2.0).epsilon(1e-15));
    CHECK(loss(pp, yy, 2.0, two) == doctest::Approx((2.0 * pos + neg) / 2.0).epsilon(1e-15));
  }
  SUBCASE("mbce averages every entry") {
    EditProbabilities p(3, 3);
    const double masked = -std::log(1.0 - kProbabilityEpsilon);
    const double missed = -std::log(kProbabilityEpsilon);
    CHECK(mbce(p, y) == doctest::Approx((16.0 * masked + 2.0 * missed) / 18.0).epsilon(1e-12));
  }
}

TEST_CASE("gradients match central finite differences") {
  // Checks every parameter whose flat index is a multiple of `stride`, plus every bias.
  auto check = [](const ConvModelParams& params, const std::vector<Example>& ex, double weight, std::size_t stride) {
    const std::vector<double> g = loss_gradient(params, ex, weight);
    std::vector<double> theta = params.flatten();
    REQUIRE(g.size() == theta.size());
    ConvModelParams probe = params;
    std::vector<bool> is_bias(theta.size(), false);
    std::size_t offset = 0;
    for (const ConvLayer& l : params.layers) {
      offset += l.weight.size();
      for (std::size_t b = 0; b < l.bias.size(); ++b) is_bias[offset + b] = true;
      offset += l.bias.size();
    }
    // Roundoff in the quotient is ~5e-10, so gradients below 1e-5 are compared
    // at that resolution rather than relatively.
    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      if (i % stride != 0 && !is_bias[i]) continue;
      const double orig = theta[i];
      theta[i] = orig + h;
      probe.assign(theta);
      const double up = mean_loss(probe, ex, weight);
      theta[i] = orig - h;
      probe.assign(theta);
      const double down = mean_loss(probe, ex, weight);
      theta[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double rel = std::abs(numeric - g[i]) / std::max({std::abs(numeric), std::abs(g[i]), 1e-5});
      worst = std::max(worst, rel);
    }
    return worst;
  };
  Rng rng(21);
  SUBCASE("discrete fcn on 5x5") {
    const ConvModelParams params = init_params(Architecture::DiscreteFcn, rng, 5);
    const std::vector<Example> ex{random_example(5, rng, true), random_example(5, rng, true)};
    const double worst = check(params, ex, 1.0, 1);
    MESSAGE("max relative error " << worst);
    CHECK(worst < 1e-4);
  }
  SUBCASE("encoder-decoder on 6x6 with class weighting") {
    const ConvModelParams params = init_params(Architecture::ContinuousEncDec, rng, 6);
    const std::vector<Example> ex{random_example(6, rng, false), random_example(6, rng, false)};
    const double worst = check(params, ex, 3.0, 29);
    MESSAGE("max relative error " << worst);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("dihedral equivariance of the discrete model") {
  Rng rng(8);
  const ConvModelParams params = init_params(Architecture::DiscreteFcn, rng);
  const std::vector<Segment> data = small_dataset(1, 90);
  for (const Dihedral g : kDihedrals) {
    const Example e{encode(data.front()), data.front().label()};
    const auto [gx, gy] = augment_discrete(e.input, e.label, g);
    const double lhs = loss(forward(params, gx), gy, 1.0, decode_belief(gx, true));
    const double rhs = loss(forward(transform_params(params, g), e.input), e.label, 1.0, decode_belief(e.input, true));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
  }
}

TEST_CASE("training") {
  const std::vector<Example> data = make_examples(small_dataset(6, 300));
  REQUIRE(data.size() >= 40);

  SUBCASE("a single sample is memorised") {
    TrainConfig cfg;
    cfg.augment = false;
    const std::vector<Example> one{data[3]};
    const TrainResult r = train(one, one, cfg);
    CHECK(r.history.back().train_loss < 0.01);
    CHECK(mean_loss(r.params, one, 1.0) < 0.01);
  }
  SUBCASE("full-batch loss is non-increasing over the first epochs") {
    TrainConfig cfg;
    cfg.augment = false;
    cfg.max_epochs = 11;
    const std::vector<Example> batch(data.begin(), data.begin() + 32);
    cfg.batch_size = 32;
    const TrainResult r = train(batch, batch, cfg);
    for (int e = 1; e < 11; ++e) CHECK(r.history[e].train_loss <= r.history[e - 1].train_loss);
  }
  SUBCASE("plain SGD path also descends") {
    TrainConfig cfg;
    cfg.augment = false;
    cfg.optimizer = Optimizer::Sgd;
    cfg.learning_rate = 0.05;
    cfg.max_epochs = 10;
    const std::vector<Example> batch(data.begin(), data.begin() + 32);
    cfg.batch_size = 32;
    const TrainResult r = train(batch, batch, cfg);
    for (int e = 1; e < 10; ++e) CHECK(r.history[e].train_loss <= r.history[e - 1].train_loss);
  }
  SUBCASE("seeded runs are identical and early stopping returns the best epoch") {
    TrainConfig cfg;
    cfg.max_epochs = 8;
    cfg.batch_size = 16;
    const TrainResult a = train(data, cfg);
    const TrainResult b = train(data, cfg);
    CHECK(a.params.flatten() == b.params.flatten());
    CHECK(a.best_epoch == b.best_epoch);
    double best = std::numeric_limits<double>::infinity();
    for (const EpochStats& s : a.history) best = std::min(best, s.validation_loss);
    CHECK(a.best_validation_loss == best);
    CHECK(a.history[static_cast<std::size_t>(a.best_epoch)].validation_loss == best);

    // Re-evaluating on the same validation split reproduces the recorded value.
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng split(cfg.seed ^ 0x5851F42D4C957F2DULL);
    split.shuffle(idx);
    const std::size_t n_val = static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(data.size())));
    std::vector<Example> val;
    for (std::size_t i = 0; i < n_val; ++i) val.push_back(data[idx[i]]);
    CHECK(mean_loss(a.params, val, 1.0) == a.best_validation_loss);
  }
  SUBCASE("divergence is reported") {
    TrainConfig cfg;
    cfg.max_epochs = 2;
    Rng rng(1);
    ConvModelParams bad = init_params(Architecture::DiscreteFcn, rng);
    bad.layers[1].weight[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(train(data, data, cfg, &bad), Error);
    try {
      train(data, data, cfg, &bad);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::TrainingFailure);
    }
  }
  SUBCASE("configuration and split validation") {
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(train(data, cfg), Error);
    CHECK_THROWS_AS(train(data, {}, TrainConfig{}), Error);
  }
}

TEST_CASE("evaluate") {
  const std::vector<Segment> data = small_dataset(3, 400);
  std::vector<EditProbabilities> perfect, zero;
  std::vector<EditMask> labels;
  std::size_t edits = 0;
  for (const Segment& s : data) {
    const EditMask y = s.label();
    edits += y.count();
    EditProbabilities p(13, 13);
    for (std::size_t i = 0; i < p.add.size(); ++i) {
      p.add.data()[i] = y.add.data()[i];
      p.remove.data()[i] = y.remove.data()[i];
    }
    perfect.push_back(p);
    zero.push_back(EditProbabilities(13, 13));
    labels.push_back(y);
  }
  REQUIRE(edits > 0);
  const EvalResult good = evaluate_predictions(perfect, labels, {});
  for (const double v : good.iou) CHECK(v == 1.0);
  CHECK(good.mbce <= -std::log(1.0 - kProbabilityEpsilon) + 1e-15);
  const EvalResult bad = evaluate_predictions(zero, labels, {});
  for (const double v : bad.iou) CHECK(v == 0.0);
  CHECK(bad.per_segment_iou.size() == data.size());

  // Hand-checked pooled IoU: predictions {a, b}, truth {b, c} -> 1/3.
  EditProbabilities p(1, 3);
  p.add.at(0, 0) = 0.9;
  p.add.at(0, 1) = 0.6;
  EditMask y(1, 3);
  y.add.at(0, 1) = 1;
  y.add.at(0, 2) = 1;
  const EvalResult r = evaluate_predictions({p}, {y}, EvalConfig{{0.5, 0.7}});
  CHECK(r.iou[0] == doctest::Approx(1.0 / 3.0));
  CHECK(r.iou[1] == 0.0);

  CHECK_THROWS_AS(evaluate_predictions({}, {}, {}), Error);
  CHECK_THROWS_AS(EvalConfig{{0.0}}.validate(), Error);
}

TEST_CASE("glpf_fit") {
  const std::vector<Segment> base = small_dataset(60, 2000);

  SUBCASE("self-recovery on data drawn from a known psychometric function") {
    const GlpfParams truth{0.04, 0.08, 16.0, 0.35, 0.15};
    Rng rng(17);
    std::vector<Segment> data;
    std::size_t cells = 0;
    while (cells < 10000) {
      for (const Segment& s : base) {
        Segment d = s;
        d.after = apply_edit(s.before, sample_edit(glpf_predict(s.before, s.observation, truth), rng));
        cells += s.observation.visible.size();
        data.push_back(std::move(d));
      }
    }
    const double generator = glpf_loss(data, truth);
    const GlpfFitResult fit = glpf_fit(data);
    MESSAGE("generator loss " << generator << " fitted " << fit.loss << " rho " << fit.params.guess);
    CHECK(std::abs(fit.loss - generator) <= 0.02 * generator);
    CHECK(std::abs(fit.params.guess - truth.guess) <= 0.05);
    CHECK(std::abs(fit.params.lapse - truth.lapse) <= 0.05);
    for (const double l : fit.start_losses) CHECK(fit.loss <= l);
    CHECK(fit.params.valid());
  }
  SUBCASE("no edits drives the guess rate to its lower bound") {
    std::vector<Segment> still = base;
    for (Segment& s : still) s.after = s.before;
    const GlpfFitResult fit = glpf_fit(still);
    CHECK(fit.params.guess < 1e-3);
  }
  SUBCASE("loss matches per-segment glpf_predict") {
    const GlpfParams p{};
    double sum = 0.0;
    double n = 0.0;
    for (const Segment& s : base) {
      sum += bce_sum(glpf_predict(s.before, s.observation, p), s.label());
      n += 2.0 * 169.0;
    }
    CHECK(glpf_loss(base, p) == doctest::Approx(sum / n).epsilon(1e-10));
    CHECK(evaluate_glpf(p, base, {}).mbce == doctest::Approx(sum / n).epsilon(1e-10));
  }
  CHECK_THROWS_AS(glpf_fit({}), Error);
}

TEST_CASE("checkpoint and dataset files") {
  Rng rng(6);
  SUBCASE("checkpoint round-trip at float precision") {
    for (const Architecture arch : {Architecture::DiscreteFcn, Architecture::ContinuousEncDec}) {
      const ConvModelParams p = init_params(arch, rng, arch == Architecture::DiscreteFcn ? 13 : 24);
      const auto path = temp_path("ckpt.bin");
      save_checkpoint(p, path);
      const ConvModelParams q = load_checkpoint(path);
      CHECK(q.architecture == arch);
      CHECK(q.resolution == p.resolution);
      const auto a = p.flatten(), b = q.flatten();
      REQUIRE(a.size() == b.size());
      bool exact = true;
      for (std::size_t i = 0; i < a.size(); ++i) exact = exact && static_cast<double>(static_cast<float>(a[i])) == b[i];
      CHECK(exact);
      std::filesystem::remove(path);
    }
  }
  SUBCASE("corrupt checkpoints are rejected") {
    const auto path = temp_path("bad.bin");
    {
      std::ofstream out(path, std::ios::binary);
      out << "NOTAMODEL";
    }
    CHECK_THROWS_AS(load_checkpoint(path), Error);
    ConvModelParams p = init_params(Architecture::DiscreteFcn, rng);
    save_checkpoint(p, path);
    // Truncate the weights.
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
    CHECK_THROWS_AS(load_checkpoint(path), Error);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_checkpoint(path), Error);
  }
  SUBCASE("dataset round-trip") {
    const std::vector<Segment> data = small_dataset(3, 77);
    const auto path = temp_path("data.bin");
    save_dataset(data, path);
    const std::vector<Segment> back = load_dataset(path);
    REQUIRE(back.size() == data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      CHECK(back[i].before == data[i].before);
      CHECK(back[i].after == data[i].after);
      CHECK(back[i].path == data[i].path);
      CHECK(back[i].observation.camera.cell == data[i].observation.camera.cell);
      CHECK(back[i].observation.camera.heading == data[i].observation.camera.heading);
      CHECK(back[i].observation.visible == data[i].observation.visible);
      CHECK(back[i].observation.labels == data[i].observation.labels);
    }
    std::filesystem::remove(path);
  }
}
