#include "sonotype/nnet.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "sonotype/error.hpp"
#include "sonotype/random.hpp"

namespace sonotype::nn {

namespace {

template <class T>
using Map = Eigen::Map<Matrix<T>>;
template <class T>
using ConstMap = Eigen::Map<const Matrix<T>>;
template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

std::string conv_name(std::size_t i, const char* what) { return "backbone/conv" + std::to_string(i) + "/" + what; }
std::string dense_name(std::size_t i, const char* what) { return "head/dense" + std::to_string(i) + "/" + what; }

template <class T>
ConstMap<T> view(const Tensor<T>& t) {
  const auto rows = static_cast<Eigen::Index>(t.shape.at(0));
  const auto cols = static_cast<Eigen::Index>(t.shape.size() > 1 ? t.shape[1] : 1);
  return ConstMap<T>(t.values.data(), rows, cols);
}

template <class T>
Map<T> view_mut(Tensor<T>& t) {
  const auto rows = static_cast<Eigen::Index>(t.shape.at(0));
  const auto cols = static_cast<Eigen::Index>(t.shape.size() > 1 ? t.shape[1] : 1);
  return Map<T>(t.values.data(), rows, cols);
}

template <class T>
Tensor<T> zeros(std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return {std::move(shape), std::vector<T>(n, T(0))};
}

template <class T>
auto row_bias(const Tensor<T>& b) {
  return Eigen::Map<const RowVec<T>>(b.values.data(), static_cast<Eigen::Index>(b.values.size()));
}

// im2col for a 3x3 "same" convolution over an HWC image.
template <class T>
void im2col(const T* in, std::size_t side, std::size_t channels, Matrix<T>& col) {
  const auto s = static_cast<std::ptrdiff_t>(side);
  col.setZero(s * s, static_cast<Eigen::Index>(9 * channels));
  for (std::ptrdiff_t y = 0; y < s; ++y) {
    for (std::ptrdiff_t x = 0; x < s; ++x) {
      T* dst = col.data() + (y * s + x) * static_cast<std::ptrdiff_t>(9 * channels);
      for (std::ptrdiff_t ky = -1; ky <= 1; ++ky) {
        const std::ptrdiff_t yy = y + ky;
        for (std::ptrdiff_t kx = -1; kx <= 1; ++kx, dst += channels) {
          const std::ptrdiff_t xx = x + kx;
          if (yy < 0 || yy >= s || xx < 0 || xx >= s) continue;
          std::copy_n(in + (yy * s + xx) * static_cast<std::ptrdiff_t>(channels), channels, dst);
        }
      }
    }
  }
}

template <class T>
void col2im(const Matrix<T>& dcol, std::size_t side, std::size_t channels, T* din) {
  const auto s = static_cast<std::ptrdiff_t>(side);
  std::fill_n(din, side * side * channels, T(0));
  for (std::ptrdiff_t y = 0; y < s; ++y) {
    for (std::ptrdiff_t x = 0; x < s; ++x) {
      const T* src = dcol.data() + (y * s + x) * static_cast<std::ptrdiff_t>(9 * channels);
      for (std::ptrdiff_t ky = -1; ky <= 1; ++ky) {
        const std::ptrdiff_t yy = y + ky;
        for (std::ptrdiff_t kx = -1; kx <= 1; ++kx, src += channels) {
          const std::ptrdiff_t xx = x + kx;
          if (yy < 0 || yy >= s || xx < 0 || xx >= s) continue;
          T* dst = din + (yy * s + xx) * static_cast<std::ptrdiff_t>(channels);
          for (std::size_t c = 0; c < channels; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

template <class T>
Matrix<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix<T> mask(rows, cols);
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = u(rng) < rate ? T(0) : scale;
  return mask;
}

template <class T>
void softmax_rows(Matrix<T>& logits) {
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    const T mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    row /= row.sum();
  }
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

bool is_backbone(std::string_view name) noexcept { return name.starts_with("backbone/"); }

void NetworkConfig::validate() const {
  if (image_side == 0 || channels == 0) fail(Errc::invalid_config, "image side and channels must be positive");
  if (conv_filters.empty()) fail(Errc::invalid_config, "backbone needs at least one conv block");
  for (auto f : conv_filters) {
    if (f == 0) fail(Errc::invalid_config, "conv filter count must be positive");
  }
  if (dense_sizes[0] == 0 || dense_sizes[1] == 0) fail(Errc::invalid_config, "dense sizes must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail(Errc::invalid_config, "dropout rate must lie in [0, 1)");
  if (num_classes < 2) fail(Errc::invalid_config, "num_classes must be >= 2");
  if (feature_side() == 0) fail(Errc::invalid_config, "image too small for the number of pooling blocks");
}

std::size_t NetworkConfig::feature_side() const {
  std::size_t side = image_side;
  for (std::size_t i = 0; i < conv_filters.size(); ++i) side /= 2;
  return side;
}

std::size_t NetworkConfig::feature_size() const {
  const std::size_t s = feature_side();
  return s * s * conv_filters.back();
}

std::string NetworkConfig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "image_side=" << image_side << "\nchannels=" << channels << "\nconv_filters=";
  for (std::size_t i = 0; i < conv_filters.size(); ++i) os << (i ? "," : "") << conv_filters[i];
  os << "\ndense_sizes=" << dense_sizes[0] << "," << dense_sizes[1] << "\ndropout_rate=" << dropout_rate
     << "\nnum_classes=" << num_classes << "\nfreeze_backbone=" << (freeze_backbone ? 1 : 0) << "\n";
  return os.str();
}

NetworkConfig NetworkConfig::from_text(std::string_view text) {
  NetworkConfig c;
  auto to_size = [](std::string_view v) {
    std::size_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) fail(Errc::invalid_config, "bad integer '" + std::string(v) + "'");
    return out;
  };
  auto to_list = [&](std::string_view v) {
    std::vector<std::size_t> out;
    while (!v.empty()) {
      auto comma = v.find(',');
      out.push_back(to_size(v.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      v.remove_prefix(comma + 1);
    }
    return out;
  };
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string_view key(line.data(), eq);
    std::string_view value(line.data() + eq + 1, line.size() - eq - 1);
    if (key == "image_side") c.image_side = to_size(value);
    else if (key == "channels") c.channels = to_size(value);
    else if (key == "conv_filters") c.conv_filters = to_list(value);
    else if (key == "dense_sizes") {
      auto d = to_list(value);
      if (d.size() != 2) fail(Errc::invalid_config, "dense_sizes needs exactly two values");
      c.dense_sizes = {d[0], d[1]};
    } else if (key == "dropout_rate") c.dropout_rate = std::stod(std::string(value));
    else if (key == "num_classes") c.num_classes = to_size(value);
    else if (key == "freeze_backbone") c.freeze_backbone = to_size(value) != 0;
  }
  c.validate();
  return c;
}

std::uint64_t NetworkConfig::hash() const {
  NetworkConfig arch = *this;
  arch.freeze_backbone = false;
  return fnv1a(arch.to_text());
}

template <class T>
Batch<T> gather(const Batch<T>& batch, std::span<const std::size_t> rows) {
  Batch<T> out;
  out.size = rows.size();
  if (batch.size == 0) return out;
  const std::size_t px = batch.images.size() / batch.size;
  out.images.resize(rows.size() * px);
  out.aux.resize(rows.size() * kAuxSize);
  if (!batch.labels.empty()) out.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    std::copy_n(batch.images.begin() + static_cast<std::ptrdiff_t>(r * px), px,
                out.images.begin() + static_cast<std::ptrdiff_t>(i * px));
    std::copy_n(batch.aux.begin() + static_cast<std::ptrdiff_t>(r * kAuxSize), kAuxSize,
                out.aux.begin() + static_cast<std::ptrdiff_t>(i * kAuxSize));
    if (!batch.labels.empty()) out.labels[i] = batch.labels[r];
  }
  return out;
}

template <class T>
Network<T>::Network(NetworkConfig config) : config_(std::move(config)) {
  config_.validate();
  std::size_t in = config_.channels;
  for (std::size_t i = 0; i < config_.conv_filters.size(); ++i) {
    const std::size_t out = config_.conv_filters[i];
    params_[conv_name(i, "kernel")] = zeros<T>({9 * in, out});
    params_[conv_name(i, "bias")] = zeros<T>({out});
    in = out;
  }
  const std::size_t head_in = config_.feature_size() + kAuxSize;
  params_[dense_name(0, "kernel")] = zeros<T>({head_in, config_.dense_sizes[0]});
  params_[dense_name(0, "bias")] = zeros<T>({config_.dense_sizes[0]});
  params_[dense_name(1, "kernel")] = zeros<T>({config_.dense_sizes[0], config_.dense_sizes[1]});
  params_[dense_name(1, "bias")] = zeros<T>({config_.dense_sizes[1]});
  params_["head/logits/kernel"] = zeros<T>({config_.dense_sizes[1], config_.num_classes});
  params_["head/logits/bias"] = zeros<T>({config_.num_classes});
}

template <class T>
void Network<T>::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& [name, tensor] : params_) {
    if (name.ends_with("/bias")) {
      std::fill(tensor.values.begin(), tensor.values.end(), T(0));
      continue;
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(tensor.shape[0]));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (auto& v : tensor.values) v = static_cast<T>(u(rng));
  }
}

template <class T>
void Network<T>::load_backbone(const ParameterMap<T>& source) {
  for (auto& [name, tensor] : params_) {
    if (!is_backbone(name)) continue;
    auto it = source.find(name);
    if (it == source.end()) fail(Errc::shape_mismatch, "backbone tensor '" + name + "' missing from source");
    if (it->second.shape != tensor.shape) fail(Errc::shape_mismatch, "backbone tensor '" + name + "' has wrong shape");
    tensor = it->second;
  }
}

template <class T>
ParameterMap<T> Network<T>::backbone() const {
  ParameterMap<T> out;
  for (const auto& [name, tensor] : params_) {
    if (is_backbone(name)) out[name] = tensor;
  }
  return out;
}

template <class T>
void Network<T>::forward_backbone(const Batch<T>& batch, Matrix<T>& features, std::vector<ConvCache<T>>* caches) const {
  const std::size_t n = batch.size;
  const std::size_t px = config_.image_side * config_.image_side * config_.channels;
  if (batch.images.size() != n * px || batch.aux.size() != n * kAuxSize) {
    fail(Errc::shape_mismatch, "batch of " + std::to_string(n) + " does not match a " +
                                   std::to_string(config_.image_side) + "x" + std::to_string(config_.image_side) + "x" +
                                   std::to_string(config_.channels) + " input");
  }
  const std::size_t blocks = config_.conv_filters.size();
  features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(config_.feature_size()));
  if (caches) {
    caches->assign(blocks, {});
    std::size_t side = config_.image_side, in = config_.channels;
    for (std::size_t l = 0; l < blocks; ++l) {
      auto& c = (*caches)[l];
      c.side = side;
      c.in_channels = in;
      c.out_channels = config_.conv_filters[l];
      c.input.resize(n * side * side * in);
      c.activation.resize(n * side * side * c.out_channels);
      c.argmax.resize(n * (side / 2) * (side / 2) * c.out_channels);
      in = c.out_channels;
      side /= 2;
    }
  }

  Matrix<T> col, act;
  std::vector<T> current, pooled;
  for (std::size_t s = 0; s < n; ++s) {
    current.assign(batch.images.begin() + static_cast<std::ptrdiff_t>(s * px),
                   batch.images.begin() + static_cast<std::ptrdiff_t>((s + 1) * px));
    std::size_t side = config_.image_side, in = config_.channels;
    for (std::size_t l = 0; l < blocks; ++l) {
      const std::size_t out = config_.conv_filters[l];
      const auto& kernel = params_.at(conv_name(l, "kernel"));
      const auto& bias = params_.at(conv_name(l, "bias"));
      im2col(current.data(), side, in, col);
      act.noalias() = col * view(kernel);
      act.rowwise() += row_bias(bias);
      act = act.cwiseMax(T(0));

      const std::size_t half = side / 2;
      pooled.assign(half * half * out, T(0));
      std::uint32_t* amax = caches ? (*caches)[l].argmax.data() + s * half * half * out : nullptr;
      for (std::size_t y = 0; y < half; ++y) {
        for (std::size_t x = 0; x < half; ++x) {
          for (std::size_t c = 0; c < out; ++c) {
            std::size_t best = ((2 * y) * side + 2 * x) * out + c;
            T best_v = act.data()[best];
            for (std::size_t dy = 0; dy < 2; ++dy) {
              for (std::size_t dx = 0; dx < 2; ++dx) {
                const std::size_t off = ((2 * y + dy) * side + 2 * x + dx) * out + c;
                if (act.data()[off] > best_v) {
                  best_v = act.data()[off];
                  best = off;
                }
              }
            }
            const std::size_t cell = (y * half + x) * out + c;
            pooled[cell] = best_v;
            if (amax) amax[cell] = static_cast<std::uint32_t>(best);
          }
        }
      }
      if (caches) {
        auto& c = (*caches)[l];
        std::copy(current.begin(), current.end(), c.input.begin() + static_cast<std::ptrdiff_t>(s * current.size()));
        std::copy_n(act.data(), act.size(), c.activation.begin() + static_cast<std::ptrdiff_t>(s * act.size()));
      }
      current.swap(pooled);
      side = half;
      in = out;
    }
    std::copy(current.begin(), current.end(), features.row(static_cast<Eigen::Index>(s)).data());
  }
}

template <class T>
Matrix<T> Network<T>::features(const Batch<T>& batch) const {
  Matrix<T> f;
  forward_backbone(batch, f, nullptr);
  return f;
}

template <class T>
ForwardPass<T> Network<T>::forward(const Batch<T>& batch, Mode mode, std::uint64_t dropout_seed, bool keep_cache) const {
  Matrix<T> f;
  std::vector<ConvCache<T>> caches;
  forward_backbone(batch, f, keep_cache ? &caches : nullptr);
  ForwardPass<T> pass = forward_head(f, batch.aux, mode, dropout_seed);
  pass.conv = std::move(caches);
  return pass;
}

template <class T>
ForwardPass<T> Network<T>::forward_head(const Matrix<T>& features, std::span<const T> aux, Mode mode,
                                        std::uint64_t dropout_seed) const {
  const auto n = features.rows();
  const auto fsize = static_cast<Eigen::Index>(config_.feature_size());
  if (features.cols() != fsize || aux.size() != static_cast<std::size_t>(n) * kAuxSize) {
    fail(Errc::shape_mismatch, "head input does not match feature size " + std::to_string(fsize));
  }
  ForwardPass<T> p;
  p.batch = static_cast<std::size_t>(n);
  p.input.resize(n, fsize + static_cast<Eigen::Index>(kAuxSize));
  p.input.leftCols(fsize) = features;
  p.input.rightCols(kAuxSize) = ConstMap<T>(aux.data(), n, static_cast<Eigen::Index>(kAuxSize));

  const bool drop = mode == Mode::training && config_.dropout_rate > 0.0;
  Rng rng(dropout_seed);

  p.z1.noalias() = p.input * view(params_.at(dense_name(0, "kernel")));
  p.z1.rowwise() += row_bias(params_.at(dense_name(0, "bias")));
  p.a1 = p.z1.cwiseMax(T(0));
  if (drop) {
    p.mask1 = dropout_mask<T>(p.a1.rows(), p.a1.cols(), config_.dropout_rate, rng);
    p.a1.array() *= p.mask1.array();
  }
  p.z2.noalias() = p.a1 * view(params_.at(dense_name(1, "kernel")));
  p.z2.rowwise() += row_bias(params_.at(dense_name(1, "bias")));
  p.a2 = p.z2.cwiseMax(T(0));
  if (drop) {
    p.mask2 = dropout_mask<T>(p.a2.rows(), p.a2.cols(), config_.dropout_rate, rng);
    p.a2.array() *= p.mask2.array();
  }
  p.probs.noalias() = p.a2 * view(params_.at("head/logits/kernel"));
  p.probs.rowwise() += row_bias(params_.at("head/logits/bias"));
  softmax_rows(p.probs);
  return p;
}

template <class T>
ParameterMap<T> Network<T>::backward(const ForwardPass<T>& p, std::span<const int> labels) const {
  const auto n = static_cast<Eigen::Index>(p.batch);
  if (labels.size() != p.batch) fail(Errc::shape_mismatch, "label count differs from batch size");
  ParameterMap<T> grads;

  Matrix<T> g = p.probs;
  for (Eigen::Index r = 0; r < n; ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || static_cast<std::size_t>(y) >= config_.num_classes) fail(Errc::shape_mismatch, "label out of range");
    g(r, y) -= T(1);
  }
  g /= static_cast<T>(n);

  auto put = [&](const std::string& name, const auto& value) {
    Tensor<T> t = zeros<T>(params_.at(name).shape);
    view_mut(t) = value;
    grads[name] = std::move(t);
  };

  put("head/logits/kernel", p.a2.transpose() * g);
  put("head/logits/bias", g.colwise().sum().transpose());
  Matrix<T> d = g * view(params_.at("head/logits/kernel")).transpose();
  if (p.mask2.size()) d.array() *= p.mask2.array();
  d.array() *= (p.z2.array() > T(0)).template cast<T>();
  put(dense_name(1, "kernel"), p.a1.transpose() * d);
  put(dense_name(1, "bias"), d.colwise().sum().transpose());
  Matrix<T> d1 = d * view(params_.at(dense_name(1, "kernel"))).transpose();
  if (p.mask1.size()) d1.array() *= p.mask1.array();
  d1.array() *= (p.z1.array() > T(0)).template cast<T>();
  put(dense_name(0, "kernel"), p.input.transpose() * d1);
  put(dense_name(0, "bias"), d1.colwise().sum().transpose());

  if (config_.freeze_backbone || p.conv.empty()) return grads;

  const auto fsize = static_cast<Eigen::Index>(config_.feature_size());
  Matrix<T> dfeat = d1 * view(params_.at(dense_name(0, "kernel"))).topRows(fsize).transpose();

  const std::size_t blocks = config_.conv_filters.size();
  std::vector<Tensor<T>> dk(blocks), db(blocks);
  for (std::size_t l = 0; l < blocks; ++l) {
    dk[l] = zeros<T>(params_.at(conv_name(l, "kernel")).shape);
    db[l] = zeros<T>(params_.at(conv_name(l, "bias")).shape);
  }
  Matrix<T> col, dz, dcol;
  std::vector<T> dcur, dprev;
  for (Eigen::Index s = 0; s < n; ++s) {
    dcur.assign(dfeat.row(s).data(), dfeat.row(s).data() + fsize);
    for (std::size_t l = blocks; l-- > 0;) {
      const auto& c = p.conv[l];
      const std::size_t area = c.side * c.side;
      const std::size_t half = c.side / 2;
      const std::size_t cells = half * half * c.out_channels;
      const T* act = c.activation.data() + static_cast<std::size_t>(s) * area * c.out_channels;
      const std::uint32_t* amax = c.argmax.data() + static_cast<std::size_t>(s) * cells;
      dz.setZero(static_cast<Eigen::Index>(area), static_cast<Eigen::Index>(c.out_channels));
      for (std::size_t cell = 0; cell < cells; ++cell) {
        const std::uint32_t off = amax[cell];
        if (act[off] > T(0)) dz.data()[off] += dcur[cell];
      }
      im2col(c.input.data() + static_cast<std::size_t>(s) * area * c.in_channels, c.side, c.in_channels, col);
      view_mut(dk[l]).noalias() += col.transpose() * dz;
      view_mut(db[l]) += dz.colwise().sum().transpose();
      if (l == 0) break;
      dcol.noalias() = dz * view(params_.at(conv_name(l, "kernel"))).transpose();
      dprev.resize(area * c.in_channels);
      col2im(dcol, c.side, c.in_channels, dprev.data());
      dcur.swap(dprev);
    }
  }
  for (std::size_t l = 0; l < blocks; ++l) {
    grads[conv_name(l, "kernel")] = std::move(dk[l]);
    grads[conv_name(l, "bias")] = std::move(db[l]);
  }
  return grads;
}

template <class T>
double cross_entropy(std::span<const T> probs, int label) {
  const double p = static_cast<double>(probs[static_cast<std::size_t>(label)]);
  return -std::log(std::max(p, 1e-12));
}

template <class T>
double mean_cross_entropy(const Matrix<T>& probs, std::span<const int> labels) {
  if (labels.size() != static_cast<std::size_t>(probs.rows())) fail(Errc::shape_mismatch, "label count differs");
  if (labels.empty()) return 0.0;
  double total = 0.0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    total += cross_entropy<T>(std::span<const T>(probs.row(r).data(), static_cast<std::size_t>(probs.cols())),
                              labels[static_cast<std::size_t>(r)]);
  }
  return total / static_cast<double>(labels.size());
}

template struct Batch<float>;
template struct Batch<double>;
template Batch<float> gather(const Batch<float>&, std::span<const std::size_t>);
template Batch<double> gather(const Batch<double>&, std::span<const std::size_t>);
template class Network<float>;
template class Network<double>;
template double cross_entropy<float>(std::span<const float>, int);
template double cross_entropy<double>(std::span<const double>, int);
template double mean_cross_entropy<float>(const Matrix<float>&, std::span<const int>);
template double mean_cross_entropy<double>(const Matrix<double>&, std::span<const int>);

}  // namespace sonotype::nn
