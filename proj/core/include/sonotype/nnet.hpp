#pragma once

// Dual-input convolutional classifier: a VGG-style backbone of
// (3x3 conv + ReLU + 2x2 max-pool) blocks, flattened and concatenated with
// the 4-value auxiliary vector, then two dense+ReLU+dropout stages and a
// softmax output layer. Gradients are derived by hand.

#include <Eigen/Core>
#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sonotype/container.hpp"
#include "sonotype/spectro.hpp"

namespace sonotype::nn {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct NetworkConfig {
  std::size_t image_side = kImageSide;
  std::size_t channels = Image8::kChannels;
  std::vector<std::size_t> conv_filters = {8, 16, 32};
  std::array<std::size_t, 2> dense_sizes = {256, 128};
  double dropout_rate = 0.5;
  std::size_t num_classes = 2;
  bool freeze_backbone = false;

  void validate() const;
  /// Side length of the backbone output grid.
  std::size_t feature_side() const;
  /// Length of the flattened backbone output.
  std::size_t feature_size() const;
  /// Hash over the architecture fields (not the freeze flag).
  std::uint64_t hash() const;
  std::string to_text() const;
  static NetworkConfig from_text(std::string_view text);
};

template <class T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> values;

  std::size_t size() const noexcept { return values.size(); }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Parameters keyed by name: backbone/conv<i>/{kernel,bias},
/// head/dense<i>/{kernel,bias}, head/logits/{kernel,bias}. Conv kernels are
/// [9 * in_channels, filters] with rows ordered (ky, kx, channel); dense
/// kernels are [inputs, outputs].
template <class T>
using ParameterMap = std::map<std::string, Tensor<T>>;

bool is_backbone(std::string_view name) noexcept;

/// Images are flattened (sample, row, col, channel) and scaled to [0, 1].
template <class T>
struct Batch {
  std::size_t size = 0;
  std::vector<T> images;
  std::vector<T> aux;
  std::vector<int> labels;  // class indices in [0, num_classes); may be empty
};

/// Builds a batch from encoded samples; label_of maps sonotype id to class.
template <class T, class LabelFn>
Batch<T> make_batch(std::span<const EncodedSample* const> samples, LabelFn&& label_of) {
  Batch<T> b;
  b.size = samples.size();
  if (samples.empty()) return b;
  const std::size_t px = samples.front()->image.data.size();
  b.images.reserve(b.size * px);
  b.aux.reserve(b.size * kAuxSize);
  b.labels.reserve(b.size);
  for (const auto* s : samples) {
    for (auto v : s->image.data) b.images.push_back(static_cast<T>(v) / T(255));
    for (auto v : s->aux) b.aux.push_back(static_cast<T>(v));
    b.labels.push_back(label_of(s->label));
  }
  return b;
}

/// Rows [first, first + count) of a batch, or an arbitrary index subset.
template <class T>
Batch<T> gather(const Batch<T>& batch, std::span<const std::size_t> rows);

enum class Mode { inference, training };

template <class T>
struct ConvCache {
  std::size_t side = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::vector<T> input;       // side * side * in_channels per sample
  std::vector<T> activation;  // post-ReLU, side * side * out_channels per sample
  std::vector<std::uint32_t> argmax;  // pooled cell -> activation offset
};

template <class T>
struct ForwardPass {
  std::size_t batch = 0;
  std::vector<ConvCache<T>> conv;  // empty when the head ran on given features
  Matrix<T> input;   // [features | aux]
  Matrix<T> z1, a1, mask1;
  Matrix<T> z2, a2, mask2;
  Matrix<T> probs;
};

template <class T>
class Network {
 public:
  explicit Network(NetworkConfig config);

  const NetworkConfig& config() const noexcept { return config_; }
  ParameterMap<T>& parameters() noexcept { return params_; }
  const ParameterMap<T>& parameters() const noexcept { return params_; }

  /// He-uniform kernels, zero biases.
  void initialize(std::uint64_t seed);
  void set_frozen(bool frozen) noexcept { config_.freeze_backbone = frozen; }

  /// Copies every backbone/* tensor from source; throws ShapeMismatch on
  /// disagreement or missing tensors.
  void load_backbone(const ParameterMap<T>& source);
  ParameterMap<T> backbone() const;

  /// Backbone output, one row per sample.
  Matrix<T> features(const Batch<T>& batch) const;

  /// Full forward pass. Dropout is active only in training mode, with masks
  /// drawn from dropout_seed. Caches are kept only when keep_cache is set.
  ForwardPass<T> forward(const Batch<T>& batch, Mode mode, std::uint64_t dropout_seed = 0,
                         bool keep_cache = false) const;
  /// Head-only forward pass on precomputed backbone features.
  ForwardPass<T> forward_head(const Matrix<T>& features, std::span<const T> aux, Mode mode,
                              std::uint64_t dropout_seed = 0) const;

  Matrix<T> predict(const Batch<T>& batch) const { return forward(batch, Mode::inference).probs; }

  /// Gradient of the mean cross-entropy over the batch. Backbone tensors are
  /// omitted when the backbone is frozen or the pass has no conv caches.
  ParameterMap<T> backward(const ForwardPass<T>& pass, std::span<const int> labels) const;

 private:
  void forward_backbone(const Batch<T>& batch, Matrix<T>& features, std::vector<ConvCache<T>>* caches) const;

  NetworkConfig config_;
  ParameterMap<T> params_;
};

/// -log(max(p_true, 1e-12)).
template <class T>
double cross_entropy(std::span<const T> probs, int label);

/// Mean of per-row cross-entropy.
template <class T>
double mean_cross_entropy(const Matrix<T>& probs, std::span<const int> labels);

// ---------------------------------------------------------------------------
// Training

enum class Optimizer { adam, sgd };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 200;
  std::size_t patience = 15;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;

  void validate() const;
};

/// Stops once the validation loss has not improved (strictly decreased) for
/// `patience` consecutive epochs. Epochs are numbered from 1.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);

  /// Records the next epoch's validation loss; returns true when training
  /// should stop after this epoch.
  bool update(double val_loss);
  bool improved() const noexcept { return improved_; }
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_loss_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  double best_loss_;
  bool improved_ = false;
};

struct StoppingOutcome {
  std::size_t stopped_epoch = 0;
  std::size_t best_epoch = 0;
};

/// Replays a validation-loss sequence through EarlyStopping, capped at
/// max_epochs (0: sequence length).
StoppingOutcome replay_early_stopping(std::span<const double> val_losses, std::size_t patience,
                                      std::size_t max_epochs = 0);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

template <class T>
struct AdamState {
  std::uint64_t step = 0;
  ParameterMap<T> m;
  ParameterMap<T> v;
};

template <class T>
struct ModelCheckpoint {
  ParameterMap<T> params;
  std::size_t epoch = 0;
  double best_val_loss = 0.0;
  std::string rng_state;
  std::uint64_t config_hash = 0;
  NetworkConfig config;
  AdamState<T> optimizer;
};

template <class T>
struct TrainResult {
  ModelCheckpoint<T> best;
  std::vector<EpochRecord> history;
  std::size_t stopped_epoch = 0;
};

/// Mini-batch training with early stopping on the validation loss. On
/// return the model holds the best checkpoint's parameters. With a frozen
/// backbone the backbone features are computed once and only the head runs
/// per step.
template <class T>
TrainResult<T> train(Network<T>& model, const Batch<T>& train_set, const Batch<T>& val_set, const TrainConfig& config);

/// Entries param/<name> plus state/{epoch,best_val_loss,rng,config_hash,
/// network_config} and state/adam/{step,m/<name>,v/<name>}.
template <class T>
Container checkpoint_to_container(const ModelCheckpoint<T>& checkpoint);
template <class T>
ModelCheckpoint<T> checkpoint_from_container(const Container& container);

/// Trains backbone plus a throwaway head on a labeled pretext corpus and
/// returns the backbone tensors. Needs >= 2 classes with >= 2 samples each.
ParameterMap<float> pretext_pretrain(const NetworkConfig& backbone_config, const Batch<float>& corpus,
                                     std::size_t num_classes, const TrainConfig& train_config,
                                     std::uint64_t seed);

}  // namespace sonotype::nn
