#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "conav/belief.hpp"
#include "conav/segment.hpp"

namespace conav {

/// Four stacked {0,1} masks, channel-major: belief walls, robot path,
/// visible cells, visible cells that are truly walls.
struct InputTensor {
  static constexpr int kChannels = 4;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  InputTensor() = default;
  InputTensor(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(kChannels) * h * w, 0.0f) {}

  float& at(int ch, int r, int c) { return data[(static_cast<std::size_t>(ch) * height + r) * width + c]; }
  float at(int ch, int r, int c) const { return data[(static_cast<std::size_t>(ch) * height + r) * width + c]; }

  friend bool operator==(const InputTensor&, const InputTensor&) = default;
};

enum class InputChannel : int { Belief = 0, Path = 1, Visible = 2, VisibleWall = 3 };

InputTensor encode(const Segment& segment);

/// Visible cells (row-major) and their labels recovered from channels 3 and 4.
struct DecodedObservation {
  std::vector<Cell> visible;
  std::vector<CellLabel> labels;
};
DecodedObservation decode_observation(const InputTensor& input);
BeliefMap decode_belief(const InputTensor& input, bool fixed_border);

/// The eight symmetries of the square. `apply(g, p)` maps cell p of an n x n
/// grid to its image; images move as out[g(p)] = in[p].
enum class Dihedral : std::uint8_t {
  Identity, Rot90, Rot180, Rot270, FlipCols, FlipRows, Transpose, AntiTranspose
};
inline constexpr Dihedral kDihedrals[] = {Dihedral::Identity, Dihedral::Rot90,    Dihedral::Rot180,
                                          Dihedral::Rot270,   Dihedral::FlipCols, Dihedral::FlipRows,
                                          Dihedral::Transpose, Dihedral::AntiTranspose};
Cell apply(Dihedral g, Cell p, int n);
Dihedral inverse(Dihedral g);
Dihedral compose(Dihedral outer, Dihedral inner);

std::pair<InputTensor, EditMask> augment_discrete(const InputTensor& input, const EditMask& label,
                                                  Dihedral g);

/// Parameters of one continuous augmentation draw.
struct ContinuousAugment {
  int side = 150;        ///< upscaled map side, in [100, 150]
  double angle = 0.0;    ///< radians, counter-clockwise about the canvas centre
  bool flip_rows = false;
  bool flip_cols = false;
};

inline constexpr int kContinuousResolution = 150;

ContinuousAugment sample_continuous_augment(Rng& rng);
std::pair<InputTensor, EditMask> augment_continuous(const Segment& segment, const ContinuousAugment& aug);
std::pair<InputTensor, EditMask> augment_continuous(const Segment& segment, Rng& rng);

enum class Architecture : std::uint8_t { DiscreteFcn, ContinuousEncDec };
std::string to_string(Architecture arch);
Architecture architecture_from_string(const std::string& tag);

enum class Activation : std::uint8_t { Relu, Sigmoid };

struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;
  int upsample_to = 0;  ///< nearest-neighbour resize of the input to this side first; 0 = none
  Activation activation = Activation::Relu;
  std::vector<double> weight;  ///< [out][in][3][3]
  std::vector<double> bias;    ///< [out]

  static constexpr int kKernel = 3;
  std::size_t weight_count() const { return static_cast<std::size_t>(out_channels) * in_channels * 9; }
};

struct ConvModelParams {
  Architecture architecture = Architecture::DiscreteFcn;
  int resolution = 13;  ///< expected input side
  std::vector<ConvLayer> layers;

  std::size_t parameter_count() const;
  /// All weights then biases of each layer, in declaration order.
  std::vector<double> flatten() const;
  void assign(const std::vector<double>& flat);
  /// True on the Wall-fixed border of discrete mazes.
  bool fixed_border() const { return architecture == Architecture::DiscreteFcn; }
};

/// Layer shapes with all-zero weights.
ConvModelParams make_architecture(Architecture arch, int resolution = 0);
/// Uniform initialisation in +-1/sqrt(fan_in).
ConvModelParams init_params(Architecture arch, Rng& rng, int resolution = 0);

/// Kernels rotated so that forward(transform_params(P, g), x) relates to
/// forward(P, g.x) by g; valid for all-stride-1 architectures.
ConvModelParams transform_params(const ConvModelParams& params, Dihedral g);

EditProbabilities forward(const ConvModelParams& params, const InputTensor& input);
std::vector<EditProbabilities> forward_batch(const ConvModelParams& params,
                                             const std::vector<InputTensor>& inputs);

/// The model's prediction: for the discrete model, forward averaged over
/// the eight dihedral transforms of the input; otherwise plain forward.
EditProbabilities predict(const ConvModelParams& params, const InputTensor& input);
std::vector<EditProbabilities> predict_batch(const ConvModelParams& params,
                                             const std::vector<InputTensor>& inputs);

inline constexpr double kProbabilityEpsilon = 1e-7;

/// Weighted BCE averaged over the cells the mask rule leaves editable,
/// both channels pooled.
double loss(const EditProbabilities& probs, const EditMask& label, double positive_weight,
            const BeliefMap& belief);
/// Unweighted BCE summed over every cell of both channels.
double bce_sum(const EditProbabilities& probs, const EditMask& label);
/// Unweighted BCE averaged over every cell of both channels.
double mbce(const EditProbabilities& probs, const EditMask& label);

/// A supervised example: encoded input and the edit that followed.
struct Example {
  InputTensor input;
  EditMask label;
};
std::vector<Example> make_examples(const std::vector<Segment>& segments);

enum class Optimizer : std::uint8_t { Sgd, Adam };
std::string to_string(Optimizer opt);
Optimizer optimizer_from_string(const std::string& name);

struct TrainConfig {
  Architecture architecture = Architecture::DiscreteFcn;
  double learning_rate = 1e-3;
  int batch_size = 128;
  int max_epochs = 200;
  double positive_weight = 1.0;
  double validation_fraction = 0.1;
  bool augment = true;  ///< random dihedral per sample per epoch (discrete only)
  Optimizer optimizer = Optimizer::Adam;
  double momentum = 0.0;
  double clip_norm = 5.0;
  int patience = 0;         ///< stop after this many epochs without improvement; 0 = never
  int micro_batch = 0;      ///< samples per forward pass; 0 = whole batch
  double ema_decay = 0.0;   ///< exponential moving average of weights used for validation; 0 = off
  std::uint64_t seed = 1;

  static TrainConfig continuous_defaults();
  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct TrainResult {
  ConvModelParams params;
  int best_epoch = -1;
  double best_validation_loss = 0.0;
  std::vector<EpochStats> history;
};

/// Mean training objective over a fixed set of examples.
double mean_loss(const ConvModelParams& params, const std::vector<Example>& examples,
                 double positive_weight);

TrainResult train(const std::vector<Example>& train_set, const std::vector<Example>& validation_set,
                  const TrainConfig& config, const ConvModelParams* initial = nullptr);
/// Seeded split of `examples` into training and validation, then train.
TrainResult train(const std::vector<Example>& examples, const TrainConfig& config);

/// Gradient of mean_loss over `examples` with respect to flatten(params),
/// evaluated in double precision.
std::vector<double> loss_gradient(const ConvModelParams& params, const std::vector<Example>& examples,
                                  double positive_weight);

struct EvalConfig {
  std::vector<double> thresholds{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  void validate() const;
};

struct EvalResult {
  double mbce = 0.0;
  std::vector<double> thresholds;
  std::vector<double> iou;              ///< pooled, parallel to thresholds
  std::vector<std::vector<double>> per_segment_iou;  ///< [segment][threshold]; NaN when both sets are empty
};

EvalResult evaluate_predictions(const std::vector<EditProbabilities>& predictions,
                                const std::vector<EditMask>& labels, const EvalConfig& config);
EvalResult evaluate(const ConvModelParams& params, const std::vector<Example>& test,
                    const EvalConfig& config);
EvalResult evaluate_glpf(const GlpfParams& params, const std::vector<Segment>& test,
                         const EvalConfig& config);

struct GlpfFitResult {
  GlpfParams params;
  double loss = 0.0;               ///< mean BCE over every cell
  std::vector<double> start_losses;
};
/// Box-constrained simplex search from a small grid of starts around `init`.
GlpfFitResult glpf_fit(const std::vector<Segment>& dataset, const GlpfParams& init = {});
/// Mean BCE of glpf_predict over every cell of the dataset.
double glpf_loss(const std::vector<Segment>& dataset, const GlpfParams& params);

void save_checkpoint(const ConvModelParams& params, const std::filesystem::path& path);
ConvModelParams load_checkpoint(const std::filesystem::path& path);

void save_dataset(const std::vector<Segment>& segments, const std::filesystem::path& path);
std::vector<Segment> load_dataset(const std::filesystem::path& path);

}  // namespace conav
