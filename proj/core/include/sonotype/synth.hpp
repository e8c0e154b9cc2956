#pragma once

// Synthetic soundscapes: parameterized call families rendered over pink
// background noise, encoded into ready-to-train catalogs.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sonotype/augment.hpp"
#include "sonotype/dataset.hpp"
#include "sonotype/ingest.hpp"

namespace sonotype {

enum class Family : std::uint8_t { chirp, harmonic, pulse_train, noise_band };
inline constexpr std::size_t kFamilyCount = 4;

std::string_view family_name(Family f) noexcept;
Family parse_family(std::string_view name);
/// Labeling convention only: chirp -> bird, harmonic -> mammal,
/// pulse_train -> amphibian, noise_band -> invertebrate.
Taxon family_taxon(Family f) noexcept;

struct SonotypeTemplate {
  Family family = Family::chirp;
  /// chirp: sweep endpoints; harmonic, pulse_train: fundamental/carrier glide;
  /// noise_band: band edges (order irrelevant).
  double f_start_hz = 1000.0;
  double f_end_hz = 2000.0;
  double duration_s = 0.5;
  double amplitude = 0.5;
  std::size_t harmonics = 3;       // harmonic only
  double pulse_rate_hz = 20.0;     // pulse_train only
  double freq_jitter = 0.0;        // fractional, uniform in [-j, j] per endpoint
  double duration_jitter = 0.0;    // fractional
  double amplitude_jitter_db = 0.0;

  /// Throws InvalidArgument unless 0 < f < nyquist and duration > 0.
  void validate(std::uint32_t sample_rate_hz = kDefaultSampleRateHz) const;

  friend bool operator==(const SonotypeTemplate&, const SonotypeTemplate&) = default;
};

struct RenderOptions {
  std::uint32_t sample_rate_hz = kDefaultSampleRateHz;
  /// Silence (background only) around the call; the onset is placed
  /// uniformly inside [lead_min_s, lead_max_s].
  double lead_min_s = 0.1;
  double lead_max_s = 0.3;
  double tail_s = 0.2;
  /// Background pink noise relative to the call's mean power; nullopt for none.
  std::optional<double> snr_db = 20.0;
  /// Imprecise annotation: each box edge moves by uniform(-j, j) times the
  /// box duration (time edges) or bandwidth (frequency edges).
  double annotation_jitter = 0.0;
  /// Chance that a recording also carries one environmental noise event
  /// (one of the standard noise-bank classes, freshly generated) at
  /// interference_snr_db relative to the call.
  double interference_prob = 0.0;
  double interference_snr_db = 0.0;
};

struct Rendering {
  AudioBuffer audio;
  /// Absent when the call is silent.
  std::optional<AnnotatedClip> clip;
  /// Noise-free component, kept for energy checks.
  std::vector<float> call;
};

/// The returned clip spans the call's exact support in time and its
/// instantaneous-frequency range padded by one spectrogram bin in frequency.
Rendering render(const SonotypeTemplate& tmpl, std::uint64_t rng_seed, const RenderOptions& options = {});

/// Key-value text: one "[template]" block per entry with key=value lines.
std::string format_templates(const std::vector<SonotypeTemplate>& templates);
std::vector<SonotypeTemplate> parse_templates(std::string_view text);

struct BenchmarkConfig {
  std::size_t num_sonotypes = 6;
  /// Fixed count per sonotype, unless long_tail is set.
  std::size_t samples_per = 49;
  /// Descending sizes max * (rank + 1)^-exponent, floored at long_tail_min.
  bool long_tail = false;
  std::size_t long_tail_max = 80;
  std::size_t long_tail_min = 3;
  double long_tail_exponent = 0.8;
  std::size_t image_side = kImageSide;
  RenderOptions render;
  /// Template draw: families cycle over this list; frequencies within
  /// [band_low_hz, band_high_hz].
  std::vector<Family> families = {Family::chirp, Family::harmonic, Family::pulse_train, Family::noise_band};
  double band_low_hz = 1500.0;
  double band_high_hz = 9000.0;
  double freq_jitter = 0.12;
  double duration_jitter = 0.3;
  double amplitude_jitter_db = 3.0;
  /// Optional user-supplied templates; otherwise drawn from the seed.
  std::vector<SonotypeTemplate> templates;
};

/// Template set for a benchmark, drawn deterministically from the seed.
std::vector<SonotypeTemplate> draw_templates(const BenchmarkConfig& config, std::uint64_t rng_seed);
std::vector<std::size_t> sample_plan(const BenchmarkConfig& config);

/// Sonotype ids are 1-based in template order.
SonotypeCatalog make_benchmark(const BenchmarkConfig& config, std::uint64_t rng_seed);

/// Renders, spectrograms and encodes one call; aux time components are
/// relative to the rendered recording.
CatalogSample render_sample(const SonotypeTemplate& tmpl, std::int32_t sonotype_id, std::uint64_t sample_id,
                            std::uint64_t rng_seed, std::size_t image_side, const RenderOptions& options);

struct PretextConfig {
  /// Classes are (family, frequency third) pairs: 4 x 3 = 12 at most.
  std::size_t num_classes = 12;
  std::size_t per_class = 40;
  std::size_t image_side = kImageSide;
  RenderOptions render;
};

/// Labeled corpus for backbone pretraining. It uses freshly drawn templates
/// per sample, so no template is shared with any benchmark.
std::vector<EncodedSample> make_pretext_corpus(const PretextConfig& config, std::uint64_t rng_seed);

/// Spectrogram images of the seven standard noise classes.
NoiseBank make_noise_bank(std::size_t image_side, std::uint64_t rng_seed);

/// Pink noise with unit variance (Kellet's filter on Gaussian noise).
std::vector<float> pink_noise(std::size_t n, std::uint64_t rng_seed);

}  // namespace sonotype
