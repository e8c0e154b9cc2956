#pragma once

#include <Eigen/Core>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "sonotype/ingest.hpp"

namespace sonotype {

/// Row-major single-precision 2-D grid.
using GrayImage = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::size_t kWindowSize = 256;
inline constexpr std::size_t kWindowOverlap = 32;
inline constexpr double kTukeyAlpha = 0.25;
inline constexpr std::size_t kImageSide = 224;
inline constexpr std::size_t kAuxSize = 4;

/// floor((num_samples - overlap) / (window - overlap)); requires
/// num_samples >= window > overlap.
std::size_t frame_count(std::size_t num_samples, std::size_t window, std::size_t overlap);

enum class WindowSymmetry {
  symmetric,  // endpoints both zero, ramps over alpha*(n-1)/2 points
  periodic,   // first n points of the symmetric (n+1)-point window (DFT-even)
};

std::vector<double> tukey_window(std::size_t n, double alpha,
                                 WindowSymmetry symmetry = WindowSymmetry::symmetric);

struct SpectrogramParams {
  std::size_t window_size = kWindowSize;
  std::size_t overlap = kWindowOverlap;
  double tukey_alpha = kTukeyAlpha;
};

/// One-sided power spectrogram. Row k holds frequency bin k (ascending,
/// k * fs / window); column j holds the frame starting at sample
/// j * (window - overlap).
struct Spectrogram {
  GrayImage grid;
  std::vector<double> freq_axis_hz;
  std::vector<double> time_axis_s;
  std::size_t window_size = kWindowSize;
  std::size_t overlap = kWindowOverlap;
  std::uint32_t sample_rate_hz = kDefaultSampleRateHz;
  double source_duration_s = 0.0;

  std::size_t height() const noexcept { return static_cast<std::size_t>(grid.rows()); }
  std::size_t width() const noexcept { return static_cast<std::size_t>(grid.cols()); }
  double nyquist_hz() const noexcept { return sample_rate_hz / 2.0; }
};

/// Frames use the periodic Tukey window, no detrending, |X|^2 without
/// density scaling; the trailing partial frame is dropped.
Spectrogram spectrogram(const AudioBuffer& audio, const SpectrogramParams& params = {});

/// (V - min) / (max - min) * 255; a constant input maps to zeros.
GrayImage normalize(const GrayImage& roi);

/// Bilinear resampling with the align-corners convention: corner pixels of
/// the input land exactly on the corners of the output.
GrayImage resize_bilinear(const GrayImage& input, std::size_t rows, std::size_t cols);

/// 8-bit, three-channel image stored interleaved (row, column, channel).
struct Image8 {
  static constexpr std::size_t kChannels = 3;

  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t at(std::size_t row, std::size_t col, std::size_t channel) const {
    return data[(row * width + col) * kChannels + channel];
  }
  std::size_t size() const noexcept { return data.size(); }

  friend bool operator==(const Image8&, const Image8&) = default;
};

/// Rounds to nearest, clamps to [0, 255] and copies into all three channels.
Image8 replicate_channels(const GrayImage& gray);
GrayImage channel_as_gray(const Image8& image, std::size_t channel = 0);

using AuxVector = std::array<float, kAuxSize>;

/// Normalized ROI image plus the auxiliary vector
/// (begin/duration, end/duration, low/nyquist, high/nyquist).
struct EncodedSample {
  Image8 image;
  AuxVector aux{};
  std::int32_t label = 0;

  friend bool operator==(const EncodedSample&, const EncodedSample&) = default;
};

struct EncodeOptions {
  std::size_t side = kImageSide;
  /// Divisor for the time components of aux; defaults to the spectrogram's
  /// source duration.
  std::optional<double> recording_duration_s;
};

/// Crops the clip's box out of the spectrogram, normalizes it, flips it so
/// row 0 holds the highest frequency, resizes to side x side and replicates
/// the result into three channels.
EncodedSample encode_sample(const Spectrogram& spec, const AnnotatedClip& clip,
                            const EncodeOptions& options = {});

}  // namespace sonotype
