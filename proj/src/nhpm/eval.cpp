#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

#include "conav/nhpm.hpp"

namespace conav {

void EvalConfig::validate() const {
  if (thresholds.empty()) throw Error(ErrorCode::InvalidConfiguration, "empty threshold grid");
  for (const double t : thresholds) {
    if (!(t > 0.0 && t < 1.0)) throw Error(ErrorCode::InvalidConfiguration, "threshold outside (0,1)");
  }
}

EvalResult evaluate_predictions(const std::vector<EditProbabilities>& predictions,
                                const std::vector<EditMask>& labels, const EvalConfig& config) {
  config.validate();
  if (predictions.empty() || predictions.size() != labels.size()) {
    throw Error(ErrorCode::InvalidArgument, "need equally many non-empty predictions and labels");
  }
  const std::size_t nt = config.thresholds.size();
  EvalResult out;
  out.thresholds = config.thresholds;
  std::vector<std::size_t> inter(nt, 0), uni(nt, 0);
  double bce = 0.0;
  std::size_t entries = 0;
  for (std::size_t s = 0; s < predictions.size(); ++s) {
    const EditProbabilities& p = predictions[s];
    const EditMask& y = labels[s];
    bce += bce_sum(p, y);
    entries += 2 * p.add.size();
    std::vector<double> seg_iou(nt);
    for (std::size_t t = 0; t < nt; ++t) {
      const double gamma = config.thresholds[t];
      std::size_t i = 0, u = 0;
      for (std::size_t k = 0; k < p.add.size(); ++k) {
        const bool pa = p.add.data()[k] >= gamma, ya = y.add.data()[k] != 0;
        const bool pr = p.remove.data()[k] >= gamma, yr = y.remove.data()[k] != 0;
        i += (pa && ya) + (pr && yr);
        u += (pa || ya) + (pr || yr);
      }
      inter[t] += i;
      uni[t] += u;
      seg_iou[t] = u == 0 ? std::numeric_limits<double>::quiet_NaN() : static_cast<double>(i) / static_cast<double>(u);
    }
    out.per_segment_iou.push_back(std::move(seg_iou));
  }
  out.mbce = bce / static_cast<double>(entries);
  for (std::size_t t = 0; t < nt; ++t) {
    out.iou.push_back(uni[t] == 0 ? std::numeric_limits<double>::quiet_NaN()
                                  : static_cast<double>(inter[t]) / static_cast<double>(uni[t]));
  }
  return out;
}

EvalResult evaluate(const ConvModelParams& params, const std::vector<Example>& test, const EvalConfig& config) {
  if (test.empty()) throw Error(ErrorCode::InvalidArgument, "empty test set");
  std::vector<InputTensor> inputs;
  std::vector<EditMask> labels;
  for (const Example& e : test) {
    inputs.push_back(e.input);
    labels.push_back(e.label);
  }
  return evaluate_predictions(predict_batch(params, inputs), labels, config);
}

EvalResult evaluate_glpf(const GlpfParams& params, const std::vector<Segment>& test, const EvalConfig& config) {
  if (test.empty()) throw Error(ErrorCode::InvalidArgument, "empty test set");
  std::vector<EditProbabilities> preds;
  std::vector<EditMask> labels;
  for (const Segment& s : test) {
    preds.push_back(glpf_predict(s.before, s.observation, params));
    labels.push_back(s.label());
  }
  return evaluate_predictions(preds, labels, config);
}

namespace {

// Sufficient statistics of a dataset for the GLPF objective: every entry
// is either a constant (probability 0 after masking), an agreeing visible
// cell (probability rho) or a mismatched visible cell at some distance.
struct GlpfStats {
  double constant = 0.0;
  double agree_pos = 0.0, agree_neg = 0.0;
  std::map<int, std::pair<double, double>> mismatch;  // squared distance -> (positives, negatives)
  double entries = 0.0;
};

double clipped_term(double p, double pos, double neg) {
  p = std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  return -pos * std::log(p) - neg * std::log(1.0 - p);
}

GlpfStats glpf_stats(const std::vector<Segment>& dataset) {
  GlpfStats st;
  double zero_pos = 0.0, zero_neg = 0.0;
  for (const Segment& s : dataset) {
    const EditMask y = s.label();
    const BeliefMap& b = s.before;
    Grid<int> seen(b.height(), b.width(), -1);
    const Observation& o = s.observation;
    for (std::size_t i = 0; i < o.visible.size(); ++i) seen[o.visible[i]] = static_cast<int>(i);
    for (std::size_t k = 0; k < y.add.size(); ++k) {
      const Cell c = y.add.cell_at(k);
      const bool wall = b.is_wall(c);
      const bool active_y = wall ? y.remove.data()[k] : y.add.data()[k];
      const bool other_y = wall ? y.add.data()[k] : y.remove.data()[k];
      (other_y ? zero_pos : zero_neg) += 1.0;
      if (seen[c] < 0 || !b.editable(c)) {
        (active_y ? zero_pos : zero_neg) += 1.0;
        continue;
      }
      const bool truly_wall = o.labels[static_cast<std::size_t>(seen[c])] == CellLabel::Wall;
      if (truly_wall == wall) {
        (active_y ? st.agree_pos : st.agree_neg) += 1.0;
      } else {
        const int dr = c.row - o.camera.cell.row, dc = c.col - o.camera.cell.col;
        auto& bucket = st.mismatch[dr * dr + dc * dc];
        (active_y ? bucket.first : bucket.second) += 1.0;
      }
    }
    st.entries += 2.0 * static_cast<double>(y.add.size());
  }
  st.constant = clipped_term(0.0, zero_pos, zero_neg);
  return st;
}

double glpf_objective(const GlpfStats& st, const GlpfParams& p) {
  double total = st.constant + clipped_term(p.guess, st.agree_pos, st.agree_neg);
  for (const auto& [d2, counts] : st.mismatch) {
    const double prob = glpf_probability(stimulus(std::sqrt(static_cast<double>(d2)), p.decay), p);
    total += clipped_term(prob, counts.first, counts.second);
  }
  return st.entries == 0.0 ? 0.0 : total / st.entries;
}

constexpr double kLower[5] = {0.0, 0.0, 1e-3, -2.0, 1e-3};
constexpr double kUpper[5] = {0.499, 0.499, 100.0, 3.0, 5.0};

GlpfParams from_vector(const double* x) {
  double v[5];
  for (int i = 0; i < 5; ++i) v[i] = std::clamp(x[i], kLower[i], kUpper[i]);
  return {v[0], v[1], v[2], v[3], v[4]};
}

struct FitContext {
  const GlpfStats* stats;
};

double gsl_objective(const gsl_vector* x, void* ctx) {
  const auto* fc = static_cast<const FitContext*>(ctx);
  double penalty = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double xi = gsl_vector_get(x, static_cast<std::size_t>(i));
    const double ci = std::clamp(xi, kLower[i], kUpper[i]);
    penalty += (xi - ci) * (xi - ci);
  }
  return glpf_objective(*fc->stats, from_vector(x->data)) + 10.0 * penalty;
}

GlpfParams simplex_search(const GlpfStats& stats, const GlpfParams& start) {
  FitContext ctx{&stats};
  gsl_multimin_function fn{&gsl_objective, 5, &ctx};
  gsl_vector* x = gsl_vector_alloc(5);
  gsl_vector* step = gsl_vector_alloc(5);
  const double init[5] = {start.guess, start.lapse, start.slope, start.midpoint, start.decay};
  const double steps[5] = {0.02, 0.02, 2.0, 0.2, 0.1};
  for (std::size_t i = 0; i < 5; ++i) {
    gsl_vector_set(x, i, init[i]);
    gsl_vector_set(step, i, steps[i]);
  }
  gsl_multimin_fminimizer* m = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 5);
  gsl_multimin_fminimizer_set(m, &fn, x, step);
  for (int iter = 0; iter < 5000; ++iter) {
    if (gsl_multimin_fminimizer_iterate(m) != 0) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m), 1e-9) == GSL_SUCCESS) break;
  }
  const GlpfParams out = from_vector(gsl_multimin_fminimizer_x(m)->data);
  gsl_multimin_fminimizer_free(m);
  gsl_vector_free(step);
  gsl_vector_free(x);
  return out;
}

}  // namespace

double glpf_loss(const std::vector<Segment>& dataset, const GlpfParams& params) {
  params.validate();
  return glpf_objective(glpf_stats(dataset), params);
}

GlpfFitResult glpf_fit(const std::vector<Segment>& dataset, const GlpfParams& init) {
  if (dataset.empty()) throw Error(ErrorCode::InvalidArgument, "empty dataset");
  init.validate();
  const GlpfStats stats = glpf_stats(dataset);
  std::vector<GlpfParams> starts{init};
  for (const double slope : {2.0, 8.0, 20.0})
    for (const double mid : {0.3, 0.6})
      for (const double decay : {0.2, 0.5}) starts.push_back({init.guess, init.lapse, slope, mid, decay});

  GlpfFitResult best;
  best.loss = std::numeric_limits<double>::infinity();
  for (const GlpfParams& s : starts) {
    const GlpfParams clamped = from_vector(std::array<double, 5>{s.guess, s.lapse, s.slope, s.midpoint, s.decay}.data());
    const double start_loss = glpf_objective(stats, clamped);
    best.start_losses.push_back(start_loss);
    if (start_loss < best.loss) {
      best.loss = start_loss;
      best.params = clamped;
    }
    const GlpfParams fitted = simplex_search(stats, clamped);
    const double l = glpf_objective(stats, fitted);
    if (l < best.loss) {
      best.loss = l;
      best.params = fitted;
    }
  }
  return best;
}

}  // namespace conav
