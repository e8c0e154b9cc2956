#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sonotype/spectro.hpp"

namespace sonotype {

enum class AugmentKind : std::uint8_t {
  crop_time,
  crop_freq,
  crop_both,
  add_noise,
  translate_freq,
  widen_time,
  widen_freq,
  sharpen,
};
inline constexpr std::size_t kAugmentKindCount = 8;

std::string_view augment_kind_name(AugmentKind kind) noexcept;

/// Edge or side an augmentation acts on. `up` is towards higher frequency
/// (image row 0), `start` towards earlier time (column 0).
enum class Direction : std::uint8_t { up, down, start, end };

inline constexpr double kMinMagnitude = 0.05;
inline constexpr double kMaxMagnitude = 0.10;

struct AugmentSpec {
  AugmentKind kind = AugmentKind::crop_time;
  double magnitude = kMinMagnitude;
  /// crop_time: start/end; crop_freq, translate_freq: up/down;
  /// crop_both: time edge (start/end). Ignored otherwise.
  Direction direction = Direction::start;
  /// crop_both only: frequency edge (up/down).
  Direction freq_direction = Direction::up;
  /// Present iff kind == add_noise.
  std::optional<std::string> noise_id;
};

/// Throws invalid_augment_spec when the magnitude or direction is out of
/// range or noise_id presence disagrees with the kind.
void validate(const AugmentSpec& spec);

/// Named background-noise images, each already normalized to [0, 255].
class NoiseBank {
 public:
  static const std::vector<std::string>& standard_names();

  void add(const std::string& name, GrayImage image);
  bool contains(const std::string& name) const { return images_.count(name) != 0; }
  const GrayImage& at(const std::string& name) const;
  std::vector<std::string> names() const;
  bool empty() const noexcept { return images_.empty(); }

  /// One container file per standard name, `<name>.sntp`, entry "noise/image"
  /// holding u8 [H, W, 3].
  void save_directory(const std::filesystem::path& dir) const;
  static NoiseBank load_directory(const std::filesystem::path& dir);

 private:
  std::map<std::string, GrayImage> images_;
};

EncodedSample apply(const EncodedSample& sample, const AugmentSpec& spec, const NoiseBank& bank = {});

/// Draws a random spec: kind uniform over the available kinds (add_noise only
/// when the bank is non-empty), magnitude uniform in [0.05, 0.10].
AugmentSpec random_spec(std::uint64_t seed, const NoiseBank& bank);

/// The original followed by count - 1 augmented variants. Variant i uses the
/// substream seed derived from (rng_seed, i).
std::vector<EncodedSample> fan_out(const EncodedSample& sample, std::size_t count, std::uint64_t rng_seed,
                                   const NoiseBank& bank = {});

struct SplitQuota {
  std::size_t train = 200;
  std::size_t val = 25;
  std::size_t test = 25;
};

/// Sample plus where it came from. parent is the index of the source original
/// within the split's input list.
struct AugmentedItem {
  EncodedSample sample;
  bool augmented = false;
  std::size_t parent = 0;
};

struct AugmentedSplits {
  std::vector<AugmentedItem> train;
  std::vector<AugmentedItem> val;
  std::vector<AugmentedItem> test;
};

/// Expands each split independently until it holds its quota. Originals are
/// kept first; variants cycle over the originals of the same split. A split
/// already at or above quota is returned unchanged.
AugmentedSplits augment_to_quota(const std::vector<EncodedSample>& train, const std::vector<EncodedSample>& val,
                                 const std::vector<EncodedSample>& test, const SplitQuota& quota,
                                 std::uint64_t rng_seed, const NoiseBank& bank = {});

}  // namespace sonotype
