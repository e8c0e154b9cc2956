#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sonotype {

inline constexpr std::uint32_t kDefaultSampleRateHz = 44100;

/// Mono audio with amplitudes in [-1, 1).
struct AudioBuffer {
  std::vector<float> samples;
  std::uint32_t sample_rate_hz = kDefaultSampleRateHz;

  double duration_s() const noexcept {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate_hz);
  }
  double nyquist_hz() const noexcept { return sample_rate_hz / 2.0; }
};

/// Throws invalid_argument when the buffer is empty, the rate is zero, or a
/// sample lies outside [-1, 1).
void validate(const AudioBuffer& audio);

enum class Taxon : std::uint8_t {
  bird,
  invertebrate,
  mammal,
  amphibian,
  unknown,
  anthropophony,
  geophony,
};

std::string_view taxon_name(Taxon taxon) noexcept;
/// Returns false for unrecognised names.
bool parse_taxon(std::string_view name, Taxon& out) noexcept;

/// Time/frequency bounding box of one labeled vocalization.
struct AnnotatedClip {
  double begin_s = 0.0;
  double end_s = 0.0;
  double low_hz = 0.0;
  double high_hz = 0.0;
  std::int32_t sonotype_id = 0;
  Taxon taxon = Taxon::unknown;

  double duration_s() const noexcept { return end_s - begin_s; }
  double bandwidth_hz() const noexcept { return high_hz - low_hz; }

  friend bool operator==(const AnnotatedClip&, const AnnotatedClip&) = default;
};

/// Decodes a RIFF/WAVE stream holding 16-bit mono PCM. Unknown chunks are
/// skipped. Each sample word v becomes v / 32768.
AudioBuffer parse_wav(std::span<const std::uint8_t> bytes);

/// Inverse of parse_wav: canonical 44-byte header followed by the data chunk.
/// Amplitudes are rounded to the nearest 1/32768 step and clamped.
std::vector<std::uint8_t> serialize_wav(const AudioBuffer& audio);

/// Parses the annotation CSV (header: begin_s,end_s,low_hz,high_hz,
/// sonotype_id,taxon in any column order). Rows are validated against the
/// clip invariants using the given sample rate's Nyquist limit.
std::vector<AnnotatedClip> parse_annotations(std::string_view text,
                                             std::uint32_t sample_rate_hz = kDefaultSampleRateHz);

std::string format_annotations(std::span<const AnnotatedClip> clips);

/// Merges consecutive same-sonotype clips whose gap is strictly below gap_s.
/// Merged clips take the union of time and frequency bounds.
std::vector<AnnotatedClip> merge_adjacent(std::span<const AnnotatedClip> clips, double gap_s = 2.0);

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace sonotype
