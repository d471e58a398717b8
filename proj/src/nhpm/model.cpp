#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "conav/nhpm.hpp"
#include "conv_engine.hpp"

namespace conav {

std::string to_string(Architecture arch) {
  return arch == Architecture::DiscreteFcn ? "discrete-fcn" : "continuous-encdec";
}

Architecture architecture_from_string(const std::string& tag) {
  if (tag == "discrete-fcn") return Architecture::DiscreteFcn;
  if (tag == "continuous-encdec") return Architecture::ContinuousEncDec;
  throw Error(ErrorCode::InvalidArchitecture, "unknown architecture tag '" + tag + "'");
}

std::string to_string(Optimizer opt) { return opt == Optimizer::Sgd ? "sgd" : "adam"; }

Optimizer optimizer_from_string(const std::string& name) {
  if (name == "sgd") return Optimizer::Sgd;
  if (name == "adam") return Optimizer::Adam;
  throw Error(ErrorCode::InvalidConfiguration, "unknown optimizer '" + name + "'");
}

std::size_t ConvModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const ConvLayer& l : layers) n += l.weight_count() + static_cast<std::size_t>(l.out_channels);
  return n;
}

std::vector<double> ConvModelParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const ConvLayer& l : layers) {
    out.insert(out.end(), l.weight.begin(), l.weight.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

void ConvModelParams::assign(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) {
    throw Error(ErrorCode::InvalidArchitecture, "parameter vector has the wrong length");
  }
  auto it = flat.begin();
  for (ConvLayer& l : layers) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(l.weight.size()), l.weight.begin());
    it += static_cast<std::ptrdiff_t>(l.weight.size());
    std::copy(it, it + static_cast<std::ptrdiff_t>(l.bias.size()), l.bias.begin());
    it += static_cast<std::ptrdiff_t>(l.bias.size());
  }
}

namespace {

ConvLayer layer(int in, int out, int stride = 1, int upsample_to = 0,
                Activation act = Activation::Relu) {
  ConvLayer l;
  l.in_channels = in;
  l.out_channels = out;
  l.stride = stride;
  l.upsample_to = upsample_to;
  l.activation = act;
  l.weight.assign(l.weight_count(), 0.0);
  l.bias.assign(static_cast<std::size_t>(out), 0.0);
  return l;
}

int halve(int s) { return (s - 1) / 2 + 1; }

}  // namespace

ConvModelParams make_architecture(Architecture arch, int resolution) {
  ConvModelParams p;
  p.architecture = arch;
  if (arch == Architecture::DiscreteFcn) {
    p.resolution = resolution > 0 ? resolution : 13;
    p.layers = {layer(4, 16), layer(16, 32), layer(32, 16), layer(16, 2, 1, 0, Activation::Sigmoid)};
    return p;
  }
  const int s0 = resolution > 0 ? resolution : kContinuousResolution;
  if (s0 < 4) throw Error(ErrorCode::InvalidArchitecture, "encoder-decoder needs resolution >= 4");
  const int s1 = halve(s0), s2 = halve(s1);
  p.resolution = s0;
  p.layers = {
      layer(4, 16),      layer(16, 16, 2), layer(16, 32),     layer(32, 32, 2),
      layer(32, 64),     layer(64, 64, 2), layer(64, 64),     layer(64, 32, 1, s2),
      layer(32, 32),     layer(32, 16, 1, s1), layer(16, 16), layer(16, 16, 1, s0),
      layer(16, 2, 1, 0, Activation::Sigmoid),
  };
  return p;
}

ConvModelParams init_params(Architecture arch, Rng& rng, int resolution) {
  ConvModelParams p = make_architecture(arch, resolution);
  for (ConvLayer& l : p.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_channels * 9));
    for (double& w : l.weight) w = rng.uniform(-bound, bound);
    for (double& b : l.bias) b = rng.uniform(-bound, bound);
  }
  return p;
}

ConvModelParams transform_params(const ConvModelParams& params, Dihedral g) {
  ConvModelParams out = params;
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const ConvLayer& l = params.layers[li];
    if (l.stride != 1 || l.upsample_to != 0) {
      throw Error(ErrorCode::InvalidArchitecture, "kernel transform needs stride-1 layers");
    }
    for (int o = 0; o < l.out_channels; ++o)
      for (int i = 0; i < l.in_channels; ++i) {
        const std::size_t base = (static_cast<std::size_t>(o) * l.in_channels + i) * 9;
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx) {
            const Cell k = apply(g, {ky, kx}, 3);
            out.layers[li].weight[base + ky * 3 + kx] = l.weight[base + k.row * 3 + k.col];
          }
      }
  }
  return out;
}

namespace {

void check_input(const ConvModelParams& params, const InputTensor& input) {
  if (input.height != params.resolution || input.width != params.resolution ||
      input.data.size() != static_cast<std::size_t>(InputTensor::kChannels) * input.height * input.width) {
    std::ostringstream msg;
    msg << to_string(params.architecture) << " expects " << params.resolution << "x" << params.resolution
        << " input, got " << input.height << "x" << input.width;
    throw Error(ErrorCode::InvalidArchitecture, msg.str());
  }
}

// Editable entries under the mask rule, read from the belief channel.
inline bool entry_active(const InputTensor& in, int channel, int r, int c, bool fixed_border) {
  if (fixed_border && (r == 0 || c == 0 || r == in.height - 1 || c == in.width - 1)) return false;
  const bool wall = in.at(0, r, c) >= 0.5f;
  return channel == 0 ? !wall : wall;
}

template <typename T>
EditProbabilities to_probs(const typename detail::ConvEngine<T>::Matrix& out, int sample,
                           const InputTensor& input, bool fixed_border) {
  const int h = input.height, w = input.width;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  EditProbabilities p(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const std::size_t col = sample * plane + static_cast<std::size_t>(r) * w + c;
      p.add.at(r, c) = entry_active(input, 0, r, c, fixed_border) ? static_cast<double>(out(0, col)) : 0.0;
      p.remove.at(r, c) = entry_active(input, 1, r, c, fixed_border) ? static_cast<double>(out(1, col)) : 0.0;
    }
  return p;
}

std::vector<float> stack_inputs(const std::vector<const InputTensor*>& inputs) {
  std::vector<float> buf;
  if (inputs.empty()) return buf;
  buf.reserve(inputs.size() * inputs.front()->data.size());
  for (const InputTensor* t : inputs) buf.insert(buf.end(), t->data.begin(), t->data.end());
  return buf;
}

// Sum of per-sample objectives over `batch`. When `grad` is given, adds
// `scale` times the gradient of that sum.
template <typename T>
double batch_objective(detail::ConvEngine<T>& engine, const std::vector<const Example*>& batch,
                       double weight, bool fixed_border, double scale, std::vector<double>* grad) {
  if (batch.empty()) return 0.0;
  std::vector<const InputTensor*> inputs;
  for (const Example* e : batch) inputs.push_back(&e->input);
  const std::vector<float> buf = stack_inputs(inputs);
  const int h = batch.front()->input.height, w = batch.front()->input.width;
  const auto& out = engine.forward(buf.data(), static_cast<int>(batch.size()), h, w);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  typename detail::ConvEngine<T>::Matrix dz;
  if (grad) dz.setZero(out.rows(), out.cols());
  const double lo = kProbabilityEpsilon, hi = 1.0 - kProbabilityEpsilon;
  double total = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const Example& ex = *batch[s];
    double sum = 0.0;
    std::size_t active = 0;
    for (int ch = 0; ch < 2; ++ch) {
      const Grid<std::uint8_t>& y = ch == 0 ? ex.label.add : ex.label.remove;
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          if (!entry_active(ex.input, ch, r, c, fixed_border)) continue;
          ++active;
          const double p = std::clamp(static_cast<double>(out(ch, s * plane + r * w + c)), lo, hi);
          sum += y.at(r, c) ? -weight * std::log(p) : -std::log(1.0 - p);
        }
    }
    if (active == 0) continue;
    total += sum / static_cast<double>(active);
    if (!grad) continue;
    const double k = scale / static_cast<double>(active);
    for (int ch = 0; ch < 2; ++ch) {
      const Grid<std::uint8_t>& y = ch == 0 ? ex.label.add : ex.label.remove;
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          if (!entry_active(ex.input, ch, r, c, fixed_border)) continue;
          const std::size_t col = s * plane + r * w + c;
          const double p = static_cast<double>(out(ch, col));
          if (p <= lo || p >= hi) continue;
          const double d = y.at(r, c) ? -weight * (1.0 - p) : p;
          dz(ch, col) = static_cast<T>(k * d);
        }
    }
  }
  if (grad) engine.backward(dz, *grad);
  return total;
}

}  // namespace

std::vector<EditProbabilities> forward_batch(const ConvModelParams& params,
                                             const std::vector<InputTensor>& inputs) {
  std::vector<EditProbabilities> out;
  if (inputs.empty()) return out;
  for (const InputTensor& in : inputs) check_input(params, in);
  detail::ConvEngine<float> engine(params);
  const std::size_t chunk = params.architecture == Architecture::DiscreteFcn ? 256 : 4;
  for (std::size_t start = 0; start < inputs.size(); start += chunk) {
    const std::size_t end = std::min(inputs.size(), start + chunk);
    std::vector<const InputTensor*> ptrs;
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&inputs[i]);
    const std::vector<float> buf = stack_inputs(ptrs);
    const auto& result = engine.forward(buf.data(), static_cast<int>(ptrs.size()), params.resolution,
                                        params.resolution);
    for (std::size_t i = start; i < end; ++i) {
      out.push_back(to_probs<float>(result, static_cast<int>(i - start), inputs[i], params.fixed_border()));
    }
  }
  return out;
}

EditProbabilities forward(const ConvModelParams& params, const InputTensor& input) {
  check_input(params, input);
  detail::ConvEngine<float> engine(params);
  const auto& result = engine.forward(input.data.data(), 1, input.height, input.width);
  return to_probs<float>(result, 0, input, params.fixed_border());
}

std::vector<EditProbabilities> predict_batch(const ConvModelParams& params,
                                             const std::vector<InputTensor>& inputs) {
  if (params.architecture != Architecture::DiscreteFcn) return forward_batch(params, inputs);
  std::vector<InputTensor> expanded;
  expanded.reserve(inputs.size() * 8);
  const EditMask none(params.resolution, params.resolution);
  for (const InputTensor& in : inputs) {
    check_input(params, in);
    for (const Dihedral g : kDihedrals) expanded.push_back(augment_discrete(in, none, g).first);
  }
  const std::vector<EditProbabilities> raw = forward_batch(params, expanded);
  const int n = params.resolution;
  std::vector<EditProbabilities> out;
  out.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    EditProbabilities avg(n, n);
    for (std::size_t k = 0; k < 8; ++k) {
      const EditProbabilities& p = raw[i * 8 + k];
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
          const Cell d = apply(kDihedrals[k], {r, c}, n);
          avg.add.at(r, c) += p.add[d];
          avg.remove.at(r, c) += p.remove[d];
        }
    }
    for (double& v : avg.add.data()) v /= 8.0;
    for (double& v : avg.remove.data()) v /= 8.0;
    out.push_back(std::move(avg));
  }
  return out;
}

EditProbabilities predict(const ConvModelParams& params, const InputTensor& input) {
  return std::move(predict_batch(params, {input}).front());
}

double loss(const EditProbabilities& probs, const EditMask& label, double positive_weight,
            const BeliefMap& belief) {
  if (!probs.add.same_shape(label.add) || !probs.add.same_shape(belief.labels)) {
    throw Error(ErrorCode::InvalidArgument, "loss operands differ in shape");
  }
  double sum = 0.0;
  std::size_t active = 0;
  for (std::size_t i = 0; i < probs.add.size(); ++i) {
    const Cell c = probs.add.cell_at(i);
    if (!belief.editable(c)) continue;
    const bool wall = belief.is_wall(c);
    const double p = std::clamp(wall ? probs.remove.data()[i] : probs.add.data()[i], kProbabilityEpsilon,
                                1.0 - kProbabilityEpsilon);
    const bool y = wall ? label.remove.data()[i] : label.add.data()[i];
    sum += y ? -positive_weight * std::log(p) : -std::log(1.0 - p);
    ++active;
  }
  return active == 0 ? 0.0 : sum / static_cast<double>(active);
}

double bce_sum(const EditProbabilities& probs, const EditMask& label) {
  if (!probs.add.same_shape(label.add)) throw Error(ErrorCode::InvalidArgument, "shape mismatch");
  double sum = 0.0;
  auto term = [](double p, bool y) {
    p = std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
    return y ? -std::log(p) : -std::log(1.0 - p);
  };
  for (std::size_t i = 0; i < probs.add.size(); ++i) {
    sum += term(probs.add.data()[i], label.add.data()[i]);
    sum += term(probs.remove.data()[i], label.remove.data()[i]);
  }
  return sum;
}

double mbce(const EditProbabilities& probs, const EditMask& label) {
  return bce_sum(probs, label) / static_cast<double>(2 * probs.add.size());
}

std::vector<Example> make_examples(const std::vector<Segment>& segments) {
  std::vector<Example> out;
  out.reserve(segments.size());
  for (const Segment& s : segments) out.push_back({encode(s), s.label()});
  return out;
}

TrainConfig TrainConfig::continuous_defaults() {
  TrainConfig c;
  c.architecture = Architecture::ContinuousEncDec;
  c.max_epochs = 5000;
  c.positive_weight = 13.0 * 13.0 * 2.0;
  c.augment = false;
  c.micro_batch = 4;
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || batch_size < 1 || max_epochs < 1 || !(positive_weight >= 1.0) ||
      !(validation_fraction > 0.0 && validation_fraction < 1.0) || momentum < 0.0 || momentum >= 1.0 ||
      !(clip_norm > 0.0) || patience < 0 || micro_batch < 0 || ema_decay < 0.0 || ema_decay >= 1.0) {
    throw Error(ErrorCode::InvalidConfiguration, "invalid training configuration");
  }
}

double mean_loss(const ConvModelParams& params, const std::vector<Example>& examples,
                 double positive_weight) {
  if (examples.empty()) return 0.0;
  for (const Example& e : examples) check_input(params, e.input);
  detail::ConvEngine<double> engine(params);
  const std::size_t chunk = params.architecture == Architecture::DiscreteFcn ? 256 : 4;
  double total = 0.0;
  for (std::size_t start = 0; start < examples.size(); start += chunk) {
    std::vector<const Example*> batch;
    for (std::size_t i = start; i < std::min(examples.size(), start + chunk); ++i) batch.push_back(&examples[i]);
    total += batch_objective(engine, batch, positive_weight, params.fixed_border(), 0.0, nullptr);
  }
  return total / static_cast<double>(examples.size());
}

std::vector<double> loss_gradient(const ConvModelParams& params, const std::vector<Example>& examples,
                                  double positive_weight) {
  std::vector<double> grad(params.parameter_count(), 0.0);
  if (examples.empty()) return grad;
  for (const Example& e : examples) check_input(params, e.input);
  detail::ConvEngine<double> engine(params);
  std::vector<const Example*> batch;
  for (const Example& e : examples) batch.push_back(&e);
  batch_objective(engine, batch, positive_weight, params.fixed_border(),
                  1.0 / static_cast<double>(examples.size()), &grad);
  return grad;
}

namespace {

class ParameterUpdate {
 public:
  ParameterUpdate(const TrainConfig& cfg, std::size_t n) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& theta, std::vector<double>& grad) {
    double norm = 0.0;
    for (const double g : grad) norm += g * g;
    norm = std::sqrt(norm);
    if (norm > cfg_.clip_norm) {
      const double k = cfg_.clip_norm / norm;
      for (double& g : grad) g *= k;
    }
    ++t_;
    if (cfg_.optimizer == Optimizer::Sgd) {
      for (std::size_t i = 0; i < theta.size(); ++i) {
        m_[i] = cfg_.momentum * m_[i] + grad[i];
        theta[i] -= cfg_.learning_rate * m_[i];
      }
      return;
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
      v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
      theta[i] -= cfg_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
    }
  }

 private:
  const TrainConfig& cfg_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

}  // namespace

namespace {

void set_prior_bias(ConvModelParams& params, const std::vector<Example>& examples) {
  // Output biases start at the log-odds of each channel's edit rate.
  double pos[2] = {0.0, 0.0}, total[2] = {0.0, 0.0};
  for (const Example& e : examples) {
    for (int ch = 0; ch < 2; ++ch) {
      const Grid<std::uint8_t>& y = ch == 0 ? e.label.add : e.label.remove;
      for (int r = 0; r < e.input.height; ++r)
        for (int c = 0; c < e.input.width; ++c) {
          if (!entry_active(e.input, ch, r, c, params.fixed_border())) continue;
          total[ch] += 1.0;
          pos[ch] += y.at(r, c);
        }
    }
  }
  ConvLayer& last = params.layers.back();
  for (int ch = 0; ch < 2; ++ch) {
    const double rate = std::clamp((pos[ch] + 1.0) / (total[ch] + 2.0), 1e-4, 0.5);
    last.bias[static_cast<std::size_t>(ch)] = std::log(rate / (1.0 - rate));
  }
}

}  // namespace

TrainResult train(const std::vector<Example>& train_set, const std::vector<Example>& validation_set,
                  const TrainConfig& config, const ConvModelParams* initial) {
  config.validate();
  if (train_set.empty() || validation_set.empty()) {
    throw Error(ErrorCode::InvalidArgument, "training and validation sets must be non-empty");
  }
  Rng rng(config.seed);
  const int resolution = train_set.front().input.height;
  ConvModelParams params = initial ? *initial : init_params(config.architecture, rng, resolution);
  if (!initial) set_prior_bias(params, train_set);
  for (const Example& e : train_set) check_input(params, e.input);
  for (const Example& e : validation_set) check_input(params, e.input);

  const bool dihedral = config.augment && params.architecture == Architecture::DiscreteFcn;
  std::vector<double> theta = params.flatten();
  std::vector<double> ema = theta;
  ConvModelParams averaged = params;
  ParameterUpdate update(config, theta.size());
  detail::ConvEngine<float> engine(params);

  TrainResult result;
  result.params = params;
  result.best_validation_loss = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Example> augmented;
  int since_best = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<const Example*> batch;
      if (dihedral) {
        augmented.clear();
        augmented.reserve(end - start);
        for (std::size_t i = start; i < end; ++i) {
          const Example& e = train_set[order[i]];
          auto [in, lab] = augment_discrete(e.input, e.label, kDihedrals[rng.below(8)]);
          augmented.push_back({std::move(in), std::move(lab)});
        }
        for (const Example& e : augmented) batch.push_back(&e);
      } else {
        for (std::size_t i = start; i < end; ++i) batch.push_back(&train_set[order[i]]);
      }
      std::vector<double> grad(theta.size(), 0.0);
      const std::size_t micro = config.micro_batch > 0 ? static_cast<std::size_t>(config.micro_batch) : batch.size();
      const double scale = 1.0 / static_cast<double>(batch.size());
      for (std::size_t m = 0; m < batch.size(); m += micro) {
        const std::vector<const Example*> part(batch.begin() + static_cast<std::ptrdiff_t>(m),
                                               batch.begin() + static_cast<std::ptrdiff_t>(std::min(batch.size(), m + micro)));
        epoch_loss += batch_objective(engine, part, config.positive_weight, params.fixed_border(), scale, &grad);
      }
      update.step(theta, grad);
      params.assign(theta);
      engine.set_params(params);
      if (config.ema_decay > 0.0) {
        for (std::size_t i = 0; i < theta.size(); ++i) ema[i] = config.ema_decay * ema[i] + (1.0 - config.ema_decay) * theta[i];
      }
    }
    const ConvModelParams* candidate = &params;
    if (config.ema_decay > 0.0) {
      averaged.assign(ema);
      candidate = &averaged;
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(train_set.size());
    stats.validation_loss = mean_loss(*candidate, validation_set, config.positive_weight);
    result.history.push_back(stats);
    if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.validation_loss)) {
      std::ostringstream msg;
      msg << "loss diverged at epoch " << epoch << " (train " << stats.train_loss << ", validation "
          << stats.validation_loss << ", lr " << config.learning_rate << ")";
      throw Error(ErrorCode::TrainingFailure, msg.str());
    }
    if (stats.validation_loss < result.best_validation_loss) {
      result.best_validation_loss = stats.validation_loss;
      result.best_epoch = epoch;
      result.params = *candidate;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

TrainResult train(const std::vector<Example>& examples, const TrainConfig& config) {
  config.validate();
  if (examples.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two examples to split");
  std::vector<std::size_t> idx(examples.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng split_rng(config.seed ^ 0x5851F42D4C957F2DULL);
  split_rng.shuffle(idx);
  const std::size_t n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(config.validation_fraction * static_cast<double>(examples.size()))), 1,
      examples.size() - 1);
  std::vector<Example> val, tr;
  for (std::size_t i = 0; i < idx.size(); ++i) (i < n_val ? val : tr).push_back(examples[idx[i]]);
  return train(tr, val, config);
}

}  // namespace conav
