#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

#include "sonotype/error.hpp"
#include "sonotype/nnet.hpp"
#include "sonotype/random.hpp"

namespace sonotype::nn {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail(Errc::invalid_config, "learning rate must be positive");
  if (batch_size == 0) fail(Errc::invalid_config, "batch size must be >= 1");
  if (max_epochs == 0) fail(Errc::invalid_config, "max epochs must be >= 1");
  if (patience == 0) fail(Errc::invalid_config, "patience must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail(Errc::invalid_config, "Adam decay rates must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) fail(Errc::invalid_config, "epsilon must be positive");
}

EarlyStopping::EarlyStopping(std::size_t patience)
    : patience_(patience), best_loss_(std::numeric_limits<double>::infinity()) {
  if (patience == 0) fail(Errc::invalid_config, "patience must be >= 1");
}

bool EarlyStopping::update(double val_loss) {
  ++epoch_;
  improved_ = val_loss < best_loss_;
  if (improved_) {
    best_loss_ = val_loss;
    best_epoch_ = epoch_;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  return since_best_ >= patience_;
}

StoppingOutcome replay_early_stopping(std::span<const double> val_losses, std::size_t patience,
                                      std::size_t max_epochs) {
  EarlyStopping es(patience);
  const std::size_t limit = max_epochs == 0 ? val_losses.size() : std::min(max_epochs, val_losses.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (es.update(val_losses[i])) break;
  }
  return {es.epoch(), es.best_epoch()};
}

namespace {

template <class T>
struct Adam {
  AdamState<T> state;
  const TrainConfig& cfg;

  void step(ParameterMap<T>& params, const ParameterMap<T>& grads) {
    ++state.step;
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    const T lr = static_cast<T>(cfg.learning_rate);
    for (const auto& [name, g] : grads) {
      auto& p = params.at(name).values;
      if (cfg.optimizer == Optimizer::sgd) {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g.values[i];
        continue;
      }
      auto& m = state.m[name].values;
      auto& v = state.v[name].values;
      if (m.empty()) {
        m.assign(p.size(), T(0));
        v.assign(p.size(), T(0));
        state.m[name].shape = g.shape;
        state.v[name].shape = g.shape;
      }
      for (std::size_t i = 0; i < p.size(); ++i) {
        const T gi = g.values[i];
        m[i] = static_cast<T>(b1) * m[i] + static_cast<T>(1.0 - b1) * gi;
        v[i] = static_cast<T>(b2) * v[i] + static_cast<T>(1.0 - b2) * gi * gi;
        const T mhat = m[i] / static_cast<T>(c1);
        const T vhat = v[i] / static_cast<T>(c2);
        p[i] -= lr * mhat / (std::sqrt(vhat) + static_cast<T>(cfg.epsilon));
      }
    }
  }
};

// Subnormal arithmetic is far slower than normal floats and gradients drift
// into that range once the loss saturates.
class FlushDenormals {
 public:
#if defined(__SSE2__)
  FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }
  ~FlushDenormals() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
};

std::string rng_text(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

template <class T>
Matrix<T> gather_rows(const Matrix<T>& m, std::span<const std::size_t> rows) {
  Matrix<T> out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

template <class T>
std::vector<T> gather_aux(const std::vector<T>& aux, std::span<const std::size_t> rows) {
  std::vector<T> out(rows.size() * kAuxSize);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(aux.begin() + static_cast<std::ptrdiff_t>(rows[i] * kAuxSize), kAuxSize,
                out.begin() + static_cast<std::ptrdiff_t>(i * kAuxSize));
  }
  return out;
}

}  // namespace

template <class T>
TrainResult<T> train(Network<T>& model, const Batch<T>& train_set, const Batch<T>& val_set, const TrainConfig& config) {
  config.validate();
  const FlushDenormals ftz;
  if (train_set.size == 0) fail(Errc::empty_split, "train split is empty");
  if (val_set.size == 0) fail(Errc::empty_split, "val split is empty");
  if (train_set.labels.size() != train_set.size || val_set.labels.size() != val_set.size) {
    fail(Errc::shape_mismatch, "every training and validation sample needs a label");
  }

  const bool frozen = model.config().freeze_backbone;
  Matrix<T> train_features, val_features;
  if (frozen) {
    train_features = model.features(train_set);
    val_features = model.features(val_set);
  }

  Rng rng(derive_seed(config.seed, {0x7261696eULL}));
  Adam<T> adam{{}, config};
  EarlyStopping stopping(config.patience);
  TrainResult<T> result;
  result.best.config = model.config();
  result.best.config_hash = model.config().hash();
  result.best.best_val_loss = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train_set.size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double train_loss = 0.0;
    for (std::size_t start = 0, step = 0; start < order.size(); start += config.batch_size, ++step) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      std::span<const std::size_t> rows(order.data() + start, count);
      const std::uint64_t dropout_seed = derive_seed(config.seed, {epoch, step});
      ForwardPass<T> pass;
      std::vector<int> labels(count);
      for (std::size_t i = 0; i < count; ++i) labels[i] = train_set.labels[rows[i]];
      if (frozen) {
        const auto aux = gather_aux(train_set.aux, rows);
        pass = model.forward_head(gather_rows(train_features, rows), aux, Mode::training, dropout_seed);
      } else {
        pass = model.forward(gather(train_set, rows), Mode::training, dropout_seed, true);
      }
      train_loss += mean_cross_entropy(pass.probs, labels) * static_cast<double>(count);
      adam.step(model.parameters(), model.backward(pass, labels));
    }
    train_loss /= static_cast<double>(order.size());

    const Matrix<T> val_probs = frozen ? model.forward_head(val_features, val_set.aux, Mode::inference).probs
                                       : model.predict(val_set);
    const double val_loss = mean_cross_entropy(val_probs, val_set.labels);
    result.history.push_back({epoch, train_loss, val_loss});

    const bool stop = stopping.update(val_loss);
    if (stopping.improved()) {
      result.best.params = model.parameters();
      result.best.epoch = epoch;
      result.best.best_val_loss = val_loss;
      result.best.rng_state = rng_text(rng);
      result.best.optimizer = adam.state;
    }
    if (stop) break;
  }
  result.stopped_epoch = stopping.epoch();
  if (result.best.params.empty()) {
    // Non-finite validation losses throughout; keep the final weights.
    result.best.params = model.parameters();
    result.best.epoch = stopping.epoch();
    result.best.rng_state = rng_text(rng);
    result.best.optimizer = adam.state;
  }
  model.parameters() = result.best.params;
  return result;
}

template <class T>
Container checkpoint_to_container(const ModelCheckpoint<T>& checkpoint) {
  Container c;
  c.put_scalar<std::uint32_t>("schema_version", kSchemaVersion);
  auto put_map = [&](const std::string& prefix, const ParameterMap<T>& map) {
    for (const auto& [name, t] : map) {
      c.put_tensor<T>(prefix + name, {t.shape.begin(), t.shape.end()}, t.values);
    }
  };
  put_map("param/", checkpoint.params);
  c.put_scalar<std::uint64_t>("state/epoch", checkpoint.epoch);
  c.put_scalar<double>("state/best_val_loss", checkpoint.best_val_loss);
  c.put_text("state/rng", checkpoint.rng_state);
  c.put_scalar<std::uint64_t>("state/config_hash", checkpoint.config_hash);
  c.put_text("state/network_config", checkpoint.config.to_text());
  c.put_scalar<std::uint64_t>("state/adam/step", checkpoint.optimizer.step);
  put_map("state/adam/m/", checkpoint.optimizer.m);
  put_map("state/adam/v/", checkpoint.optimizer.v);
  return c;
}

template <class T>
ModelCheckpoint<T> checkpoint_from_container(const Container& c) {
  ModelCheckpoint<T> cp;
  cp.config = NetworkConfig::from_text(c.text("state/network_config"));
  cp.config_hash = c.scalar<std::uint64_t>("state/config_hash");
  if (cp.config_hash != cp.config.hash()) fail(Errc::shape_mismatch, "config hash disagrees with stored network config");
  cp.epoch = c.scalar<std::uint64_t>("state/epoch");
  cp.best_val_loss = c.scalar<double>("state/best_val_loss");
  if (!std::isfinite(cp.best_val_loss)) fail(Errc::invalid_config, "best validation loss is not finite");
  cp.rng_state = c.text("state/rng");
  cp.optimizer.step = c.scalar<std::uint64_t>("state/adam/step");

  const Network<T> reference(cp.config);
  auto read_map = [&](const std::string& prefix, bool required) {
    ParameterMap<T> out;
    for (const auto& [name, t] : reference.parameters()) {
      const std::string key = prefix + name;
      if (!c.contains(key)) {
        if (required) fail(Errc::missing_entry, "no entry '" + key + "'");
        continue;
      }
      const Entry& e = c.at(key);
      if (!std::equal(e.dims.begin(), e.dims.end(), t.shape.begin(), t.shape.end())) {
        fail(Errc::shape_mismatch, "entry '" + key + "' does not match the network config");
      }
      out[name] = Tensor<T>{t.shape, c.get<T>(key)};
    }
    return out;
  };
  cp.params = read_map("param/", true);
  cp.optimizer.m = read_map("state/adam/m/", false);
  cp.optimizer.v = read_map("state/adam/v/", false);
  return cp;
}

ParameterMap<float> pretext_pretrain(const NetworkConfig& backbone_config, const Batch<float>& corpus,
                                     std::size_t num_classes, const TrainConfig& train_config, std::uint64_t seed) {
  if (num_classes < 2) fail(Errc::corpus_too_small, "pretext task needs >= 2 classes");
  if (corpus.labels.size() != corpus.size) fail(Errc::shape_mismatch, "pretext corpus needs a label per sample");
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < corpus.size; ++i) {
    const int y = corpus.labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) fail(Errc::shape_mismatch, "pretext label out of range");
    by_class[static_cast<std::size_t>(y)].push_back(i);
  }
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (by_class[k].size() < 2) {
      fail(Errc::corpus_too_small, "pretext class " + std::to_string(k) + " has " +
                                       std::to_string(by_class[k].size()) + " samples, needs >= 2");
    }
  }

  Rng rng(derive_seed(seed, {0x70726574ULL}));
  std::vector<std::size_t> train_rows, val_rows;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const std::size_t n_val = std::max<std::size_t>(1, members.size() / 5);
    val_rows.insert(val_rows.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
    train_rows.insert(train_rows.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(val_rows.begin(), val_rows.end());

  NetworkConfig cfg = backbone_config;
  cfg.num_classes = num_classes;
  cfg.freeze_backbone = false;
  Network<float> net(cfg);
  net.initialize(derive_seed(seed, {0x696e6974ULL}));
  TrainConfig tc = train_config;
  tc.seed = derive_seed(seed, {0x74726eULL});
  train(net, gather(corpus, train_rows), gather(corpus, val_rows), tc);
  return net.backbone();
}

template TrainResult<float> train(Network<float>&, const Batch<float>&, const Batch<float>&, const TrainConfig&);
template TrainResult<double> train(Network<double>&, const Batch<double>&, const Batch<double>&, const TrainConfig&);
template Container checkpoint_to_container(const ModelCheckpoint<float>&);
template Container checkpoint_to_container(const ModelCheckpoint<double>&);
template ModelCheckpoint<float> checkpoint_from_container(const Container&);
template ModelCheckpoint<double> checkpoint_from_container(const Container&);

}  // namespace sonotype::nn
