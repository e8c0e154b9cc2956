#include "sonotype/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "sonotype/container.hpp"
#include "sonotype/error.hpp"
#include "sonotype/random.hpp"

namespace sonotype {

std::string_view augment_kind_name(AugmentKind kind) noexcept {
  static constexpr std::array<std::string_view, kAugmentKindCount> kNames = {
      "crop_time", "crop_freq", "crop_both", "add_noise", "translate_freq", "widen_time", "widen_freq", "sharpen"};
  return kNames[static_cast<std::size_t>(kind)];
}

void validate(const AugmentSpec& spec) {
  if (!(spec.magnitude >= kMinMagnitude && spec.magnitude <= kMaxMagnitude)) {
    fail(Errc::invalid_augment_spec, "magnitude " + std::to_string(spec.magnitude) + " outside [0.05, 0.10]");
  }
  const bool is_noise = spec.kind == AugmentKind::add_noise;
  if (is_noise != spec.noise_id.has_value()) {
    fail(Errc::invalid_augment_spec, "noise_id must be present iff kind is add_noise");
  }
  auto is_time = [](Direction d) { return d == Direction::start || d == Direction::end; };
  auto is_freq = [](Direction d) { return d == Direction::up || d == Direction::down; };
  switch (spec.kind) {
    case AugmentKind::crop_time:
      if (!is_time(spec.direction)) fail(Errc::invalid_augment_spec, "crop_time needs start or end");
      break;
    case AugmentKind::crop_freq:
    case AugmentKind::translate_freq:
      if (!is_freq(spec.direction)) {
        fail(Errc::invalid_augment_spec, std::string(augment_kind_name(spec.kind)) + " needs up or down");
      }
      break;
    case AugmentKind::crop_both:
      if (!is_time(spec.direction) || !is_freq(spec.freq_direction)) {
        fail(Errc::invalid_augment_spec, "crop_both needs a time edge and a frequency edge");
      }
      break;
    default:
      break;
  }
}

const std::vector<std::string>& NoiseBank::standard_names() {
  static const std::vector<std::string> kNames = {"rain_light", "rain_medium", "rain_heavy", "thunder",
                                                  "aircraft",   "chainsaw",    "vehicle"};
  return kNames;
}

void NoiseBank::add(const std::string& name, GrayImage image) {
  if (image.size() == 0) fail(Errc::invalid_argument, "noise image '" + name + "' is empty");
  if (image.minCoeff() < 0.0f || image.maxCoeff() > 255.0f) {
    fail(Errc::invalid_argument, "noise image '" + name + "' is not normalized to [0, 255]");
  }
  images_[name] = std::move(image);
}

const GrayImage& NoiseBank::at(const std::string& name) const {
  auto it = images_.find(name);
  if (it == images_.end()) fail(Errc::unknown_noise_id, "noise '" + name + "' not in bank");
  return it->second;
}

std::vector<std::string> NoiseBank::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : images_) out.push_back(name);
  return out;
}

void NoiseBank::save_directory(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [name, image] : images_) {
    Container c;
    c.put_u8("noise/image", {static_cast<std::uint64_t>(image.rows()), static_cast<std::uint64_t>(image.cols()), 3},
             replicate_channels(image).data);
    write_container_file(dir / (name + ".sntp"), c);
  }
}

NoiseBank NoiseBank::load_directory(const std::filesystem::path& dir) {
  NoiseBank bank;
  for (const auto& name : standard_names()) {
    auto path = dir / (name + ".sntp");
    if (!std::filesystem::exists(path)) continue;
    Container c = read_container_file(path);
    const auto& entry = c.at("noise/image");
    if (entry.dtype != DType::u8 || entry.dims.size() != 3 || entry.dims[2] != 3) {
      fail(Errc::shape_mismatch, "noise/image in " + path.string() + " must be u8 [H, W, 3]");
    }
    Image8 img{entry.dims[0], entry.dims[1], entry.payload};
    bank.add(name, channel_as_gray(img));
  }
  return bank;
}

namespace {

std::size_t fraction_of(double m, std::size_t n) {
  auto k = static_cast<std::size_t>(std::llround(m * static_cast<double>(n)));
  return std::clamp<std::size_t>(k, 1, n > 1 ? n - 1 : 1);
}

GrayImage block(const GrayImage& g, std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols) {
  return g.block(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(c0), static_cast<Eigen::Index>(rows),
                 static_cast<Eigen::Index>(cols));
}

float clamp_unit(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

struct Interval {
  double lo, hi;
  double width() const { return hi - lo; }
};

}  // namespace

EncodedSample apply(const EncodedSample& sample, const AugmentSpec& spec, const NoiseBank& bank) {
  validate(spec);
  const GrayImage g = channel_as_gray(sample.image);
  const std::size_t h = sample.image.height;
  const std::size_t w = sample.image.width;
  if (h < 2 || w < 2) fail(Errc::shape_mismatch, "augment needs an image of at least 2x2");
  const double m = spec.magnitude;
  Interval t{sample.aux[0], sample.aux[1]};
  Interval f{sample.aux[2], sample.aux[3]};
  GrayImage out;

  auto crop_time = [&](const GrayImage& in, Direction d) {
    const std::size_t cols = static_cast<std::size_t>(in.cols());
    const std::size_t n = fraction_of(m, cols);
    const double dt = m * t.width();
    if (d == Direction::start) {
      t.lo += dt;
      return block(in, 0, n, static_cast<std::size_t>(in.rows()), cols - n);
    }
    t.hi -= dt;
    return block(in, 0, 0, static_cast<std::size_t>(in.rows()), cols - n);
  };
  auto crop_freq = [&](const GrayImage& in, Direction d) {
    const std::size_t rows = static_cast<std::size_t>(in.rows());
    const std::size_t n = fraction_of(m, rows);
    const double df = m * f.width();
    if (d == Direction::up) {
      f.hi -= df;
      return block(in, n, 0, rows - n, static_cast<std::size_t>(in.cols()));
    }
    f.lo += df;
    return block(in, 0, 0, rows - n, static_cast<std::size_t>(in.cols()));
  };

  switch (spec.kind) {
    case AugmentKind::crop_time:
      out = resize_bilinear(crop_time(g, spec.direction), h, w);
      break;
    case AugmentKind::crop_freq:
      out = resize_bilinear(crop_freq(g, spec.direction), h, w);
      break;
    case AugmentKind::crop_both:
      out = resize_bilinear(crop_freq(crop_time(g, spec.direction), spec.freq_direction), h, w);
      break;
    case AugmentKind::add_noise: {
      GrayImage noise = resize_bilinear(bank.at(*spec.noise_id), h, w);
      out = normalize(g + noise / 3.0f);
      break;
    }
    case AugmentKind::translate_freq: {
      const auto shift = static_cast<std::size_t>(std::llround(m * static_cast<double>(h)));
      out = GrayImage::Zero(g.rows(), g.cols());
      const auto keep = static_cast<Eigen::Index>(h - shift);
      if (spec.direction == Direction::up) {
        out.topRows(keep) = g.bottomRows(keep);
      } else {
        out.bottomRows(keep) = g.topRows(keep);
      }
      const double df = (spec.direction == Direction::up ? m : -m) * f.width();
      f.lo += df;
      f.hi += df;
      break;
    }
    case AugmentKind::widen_time: {
      const auto wide = static_cast<std::size_t>(std::llround(static_cast<double>(w) * (1.0 + m)));
      out = block(resize_bilinear(g, h, wide), 0, (wide - w) / 2, h, w);
      const double half = 0.5 * m * t.width();
      t.lo -= half;
      t.hi += half;
      break;
    }
    case AugmentKind::widen_freq: {
      const auto tall = static_cast<std::size_t>(std::llround(static_cast<double>(h) * (1.0 + m)));
      out = block(resize_bilinear(g, tall, w), (tall - h) / 2, 0, h, w);
      const double half = 0.5 * m * f.width();
      f.lo -= half;
      f.hi += half;
      break;
    }
    case AugmentKind::sharpen: {
      const auto rows = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(h) * (1.0 - m))));
      const auto cols = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(w) * (1.0 - m))));
      out = GrayImage::Zero(g.rows(), g.cols());
      out.block(static_cast<Eigen::Index>((h - rows) / 2), static_cast<Eigen::Index>((w - cols) / 2),
                static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)) = resize_bilinear(g, rows, cols);
      const double tc = 0.5 * (t.lo + t.hi), th = 0.5 * (1.0 - m) * t.width();
      const double fc = 0.5 * (f.lo + f.hi), fh = 0.5 * (1.0 - m) * f.width();
      t = {tc - th, tc + th};
      f = {fc - fh, fc + fh};
      break;
    }
  }

  EncodedSample result;
  result.image = replicate_channels(out);
  result.label = sample.label;
  result.aux = {clamp_unit(t.lo), clamp_unit(t.hi), clamp_unit(f.lo), clamp_unit(f.hi)};
  return result;
}

AugmentSpec random_spec(std::uint64_t seed, const NoiseBank& bank) {
  Rng rng(seed);
  std::vector<AugmentKind> kinds;
  for (std::size_t k = 0; k < kAugmentKindCount; ++k) {
    auto kind = static_cast<AugmentKind>(k);
    if (kind == AugmentKind::add_noise && bank.empty()) continue;
    kinds.push_back(kind);
  }
  AugmentSpec spec;
  spec.kind = kinds[uniform_index(rng, kinds.size())];
  spec.magnitude = uniform(rng, kMinMagnitude, kMaxMagnitude);
  const bool coin = uniform_index(rng, 2) == 1;
  const bool coin2 = uniform_index(rng, 2) == 1;
  switch (spec.kind) {
    case AugmentKind::crop_time:
      spec.direction = coin ? Direction::end : Direction::start;
      break;
    case AugmentKind::crop_freq:
    case AugmentKind::translate_freq:
      spec.direction = coin ? Direction::down : Direction::up;
      break;
    case AugmentKind::crop_both:
      spec.direction = coin ? Direction::end : Direction::start;
      spec.freq_direction = coin2 ? Direction::down : Direction::up;
      break;
    case AugmentKind::add_noise: {
      auto names = bank.names();
      spec.noise_id = names[uniform_index(rng, names.size())];
      break;
    }
    default:
      break;
  }
  return spec;
}

std::vector<EncodedSample> fan_out(const EncodedSample& sample, std::size_t count, std::uint64_t rng_seed,
                                   const NoiseBank& bank) {
  if (count == 0) fail(Errc::invalid_argument, "fan_out count must be >= 1");
  std::vector<EncodedSample> out;
  out.reserve(count);
  out.push_back(sample);
  for (std::size_t i = 1; i < count; ++i) {
    out.push_back(apply(sample, random_spec(derive_seed(rng_seed, {i}), bank), bank));
  }
  return out;
}

namespace {

std::vector<AugmentedItem> expand_split(const std::vector<EncodedSample>& originals, std::size_t quota,
                                        std::uint64_t seed, const NoiseBank& bank) {
  std::vector<AugmentedItem> out;
  out.reserve(std::max(quota, originals.size()));
  for (std::size_t i = 0; i < originals.size(); ++i) out.push_back({originals[i], false, i});
  for (std::size_t j = 0; out.size() < quota; ++j) {
    const std::size_t parent = j % originals.size();
    auto spec = random_spec(derive_seed(seed, {j}), bank);
    out.push_back({apply(originals[parent], spec, bank), true, parent});
  }
  return out;
}

}  // namespace

AugmentedSplits augment_to_quota(const std::vector<EncodedSample>& train, const std::vector<EncodedSample>& val,
                                 const std::vector<EncodedSample>& test, const SplitQuota& quota,
                                 std::uint64_t rng_seed, const NoiseBank& bank) {
  if (train.empty()) fail(Errc::empty_split, "train split is empty");
  if (val.empty()) fail(Errc::empty_split, "val split is empty");
  if (test.empty()) fail(Errc::empty_split, "test split is empty");
  AugmentedSplits out;
  out.train = expand_split(train, quota.train, derive_seed(rng_seed, {0}), bank);
  out.val = expand_split(val, quota.val, derive_seed(rng_seed, {1}), bank);
  out.test = expand_split(test, quota.test, derive_seed(rng_seed, {2}), bank);
  return out;
}

}  // namespace sonotype
