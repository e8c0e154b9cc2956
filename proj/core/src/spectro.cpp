#include "sonotype/spectro.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "fft.hpp"
#include "sonotype/error.hpp"

namespace sonotype {

std::size_t frame_count(std::size_t num_samples, std::size_t window, std::size_t overlap) {
  if (!(window > overlap)) {
    fail(Errc::invalid_framing, "window (" + std::to_string(window) + ") must exceed overlap (" +
                                    std::to_string(overlap) + ")");
  }
  if (num_samples < window) {
    fail(Errc::invalid_framing, "num_samples (" + std::to_string(num_samples) + ") < window (" +
                                    std::to_string(window) + ")");
  }
  return (num_samples - overlap) / (window - overlap);
}

std::vector<double> tukey_window(std::size_t n, double alpha, WindowSymmetry symmetry) {
  if (n < 2) fail(Errc::invalid_argument, "tukey window needs n >= 2");
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(Errc::invalid_argument, "tukey alpha must lie in [0, 1]");
  const std::size_t m = symmetry == WindowSymmetry::periodic ? n + 1 : n;
  std::vector<double> w(m, 1.0);
  const double span = static_cast<double>(m - 1);
  if (alpha == 0.0) {
    w.resize(n);
    return w;
  }
  if (alpha == 1.0) {
    for (std::size_t i = 0; i < m; ++i) {
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / span);
    }
    w.resize(n);
    return w;
  }
  const auto width = static_cast<std::size_t>(std::floor(alpha * span / 2.0));
  for (std::size_t i = 0; i <= width; ++i) {
    double x = static_cast<double>(i);
    w[i] = 0.5 * (1.0 + std::cos(std::numbers::pi * (-1.0 + 2.0 * x / alpha / span)));
  }
  for (std::size_t i = m - width - 1; i < m; ++i) {
    double x = static_cast<double>(i);
    w[i] = 0.5 * (1.0 + std::cos(std::numbers::pi * (-2.0 / alpha + 1.0 + 2.0 * x / alpha / span)));
  }
  w.resize(n);
  return w;
}

Spectrogram spectrogram(const AudioBuffer& audio, const SpectrogramParams& params) {
  if (audio.samples.size() < params.window_size) {
    fail(Errc::audio_too_short, "audio has " + std::to_string(audio.samples.size()) +
                                    " samples, need at least " + std::to_string(params.window_size));
  }
  if (!detail::is_power_of_two(params.window_size)) {
    fail(Errc::invalid_framing, "window size must be a power of two");
  }
  const std::size_t frames = frame_count(audio.samples.size(), params.window_size, params.overlap);
  const std::size_t bins = params.window_size / 2 + 1;
  const std::size_t hop = params.window_size - params.overlap;
  const double fs = static_cast<double>(audio.sample_rate_hz);

  Spectrogram spec;
  spec.window_size = params.window_size;
  spec.overlap = params.overlap;
  spec.sample_rate_hz = audio.sample_rate_hz;
  spec.source_duration_s = audio.duration_s();
  spec.grid.resize(static_cast<Eigen::Index>(bins), static_cast<Eigen::Index>(frames));
  spec.freq_axis_hz.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    spec.freq_axis_hz[k] = static_cast<double>(k) * fs / static_cast<double>(params.window_size);
  }
  spec.time_axis_s.resize(frames);

  const auto window = tukey_window(params.window_size, params.tukey_alpha, WindowSymmetry::periodic);
  detail::Fft fft(params.window_size);
  std::vector<std::complex<double>> buf(params.window_size);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t start = f * hop;
    spec.time_axis_s[f] = (static_cast<double>(start) + params.window_size / 2.0) / fs;
    for (std::size_t i = 0; i < params.window_size; ++i) {
      buf[i] = {static_cast<double>(audio.samples[start + i]) * window[i], 0.0};
    }
    fft.forward(buf);
    for (std::size_t k = 0; k < bins; ++k) {
      spec.grid(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(f)) =
          static_cast<float>(std::norm(buf[k]));
    }
  }
  return spec;
}

GrayImage normalize(const GrayImage& roi) {
  if (roi.size() == 0) fail(Errc::invalid_argument, "normalize needs a non-empty roi");
  const double lo = roi.minCoeff();
  const double hi = roi.maxCoeff();
  GrayImage out(roi.rows(), roi.cols());
  if (hi == lo) {
    out.setZero();
    return out;
  }
  const double range = hi - lo;
  for (Eigen::Index i = 0; i < roi.size(); ++i) {
    double v = (static_cast<double>(roi.data()[i]) - lo) / range * 255.0;
    out.data()[i] = static_cast<float>(std::clamp(v, 0.0, 255.0));
  }
  return out;
}

GrayImage resize_bilinear(const GrayImage& input, std::size_t rows, std::size_t cols) {
  if (input.size() == 0 || rows == 0 || cols == 0) {
    fail(Errc::invalid_argument, "resize_bilinear needs non-empty input and output");
  }
  const auto in_rows = static_cast<std::size_t>(input.rows());
  const auto in_cols = static_cast<std::size_t>(input.cols());
  if (in_rows == rows && in_cols == cols) return input;

  auto coords = [](std::size_t out_n, std::size_t in_n) {
    std::vector<std::pair<std::size_t, double>> c(out_n);
    for (std::size_t i = 0; i < out_n; ++i) {
      double pos = out_n == 1 || in_n == 1
                       ? 0.0
                       : static_cast<double>(i) * static_cast<double>(in_n - 1) / static_cast<double>(out_n - 1);
      auto base = std::min(static_cast<std::size_t>(std::floor(pos)), in_n - 1);
      double frac = pos - static_cast<double>(base);
      if (base + 1 >= in_n) frac = 0.0;
      c[i] = {base, frac};
    }
    return c;
  };
  const auto ry = coords(rows, in_rows);
  const auto rx = coords(cols, in_cols);

  GrayImage out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    const auto [y0, fy] = ry[i];
    const std::size_t y1 = std::min(y0 + 1, in_rows - 1);
    for (std::size_t j = 0; j < cols; ++j) {
      const auto [x0, fx] = rx[j];
      const std::size_t x1 = std::min(x0 + 1, in_cols - 1);
      auto px = [&](std::size_t y, std::size_t x) {
        return static_cast<double>(input(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)));
      };
      double top = px(y0, x0) + fx * (px(y0, x1) - px(y0, x0));
      double bottom = px(y1, x0) + fx * (px(y1, x1) - px(y1, x0));
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<float>(top + fy * (bottom - top));
    }
  }
  return out;
}

Image8 replicate_channels(const GrayImage& gray) {
  Image8 img;
  img.height = static_cast<std::size_t>(gray.rows());
  img.width = static_cast<std::size_t>(gray.cols());
  img.data.resize(img.height * img.width * Image8::kChannels);
  for (Eigen::Index i = 0; i < gray.size(); ++i) {
    double v = std::clamp(static_cast<double>(gray.data()[i]), 0.0, 255.0);
    auto byte = static_cast<std::uint8_t>(std::nearbyint(v));
    auto* px = img.data.data() + static_cast<std::size_t>(i) * Image8::kChannels;
    px[0] = px[1] = px[2] = byte;
  }
  return img;
}

GrayImage channel_as_gray(const Image8& image, std::size_t channel) {
  GrayImage gray(static_cast<Eigen::Index>(image.height), static_cast<Eigen::Index>(image.width));
  for (std::size_t i = 0; i < image.height * image.width; ++i) {
    gray.data()[i] = static_cast<float>(image.data[i * Image8::kChannels + channel]);
  }
  return gray;
}

namespace {

// Indices whose axis value lies in [lo, hi]; falls back to the single index
// nearest the interval midpoint when the interval is narrower than a bin.
std::pair<std::size_t, std::size_t> axis_span(const std::vector<double>& axis, double lo, double hi) {
  auto first = std::lower_bound(axis.begin(), axis.end(), lo);
  auto last = std::upper_bound(axis.begin(), axis.end(), hi);
  if (first < last) {
    return {static_cast<std::size_t>(first - axis.begin()), static_cast<std::size_t>(last - axis.begin())};
  }
  const double mid = 0.5 * (lo + hi);
  auto it = std::lower_bound(axis.begin(), axis.end(), mid);
  std::size_t idx;
  if (it == axis.end()) {
    idx = axis.size() - 1;
  } else if (it == axis.begin()) {
    idx = 0;
  } else {
    idx = static_cast<std::size_t>(it - axis.begin());
    if (mid - *(it - 1) <= *it - mid) --idx;
  }
  return {idx, idx + 1};
}

}  // namespace

EncodedSample encode_sample(const Spectrogram& spec, const AnnotatedClip& clip, const EncodeOptions& options) {
  if (spec.grid.size() == 0 || spec.freq_axis_hz.empty() || spec.time_axis_s.empty()) {
    fail(Errc::invalid_argument, "encode_sample needs a non-empty spectrogram");
  }
  if (options.side == 0) fail(Errc::invalid_argument, "encode side must be positive");
  const double duration = options.recording_duration_s.value_or(spec.source_duration_s);
  const double nyquist = spec.nyquist_hz();
  constexpr double kSlack = 1e-9;
  if (clip.begin_s < 0.0) fail(Errc::out_of_bounds, "begin_s=" + std::to_string(clip.begin_s) + " < 0");
  if (clip.end_s > spec.source_duration_s + kSlack) {
    fail(Errc::out_of_bounds, "end_s=" + std::to_string(clip.end_s) + " beyond recording end " +
                                  std::to_string(spec.source_duration_s));
  }
  if (!(clip.begin_s < clip.end_s)) fail(Errc::out_of_bounds, "begin_s must be < end_s");
  if (clip.low_hz < 0.0) fail(Errc::out_of_bounds, "low_hz=" + std::to_string(clip.low_hz) + " < 0");
  if (clip.high_hz > nyquist + kSlack) {
    fail(Errc::out_of_bounds, "high_hz=" + std::to_string(clip.high_hz) + " beyond nyquist " +
                                  std::to_string(nyquist));
  }
  if (!(clip.low_hz < clip.high_hz)) fail(Errc::out_of_bounds, "low_hz must be < high_hz");
  if (!(duration > 0.0)) fail(Errc::invalid_argument, "recording duration must be positive");

  const auto [c0, c1] = axis_span(spec.time_axis_s, clip.begin_s, clip.end_s);
  const auto [r0, r1] = axis_span(spec.freq_axis_hz, clip.low_hz, clip.high_hz);
  GrayImage crop = spec.grid.block(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(c0),
                                   static_cast<Eigen::Index>(r1 - r0), static_cast<Eigen::Index>(c1 - c0));
  GrayImage flipped = normalize(crop).colwise().reverse();

  EncodedSample sample;
  sample.image = replicate_channels(resize_bilinear(flipped, options.side, options.side));
  sample.label = clip.sonotype_id;
  auto unit = [](double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); };
  sample.aux = {unit(clip.begin_s / duration), unit(clip.end_s / duration), unit(clip.low_hz / nyquist),
                unit(clip.high_hz / nyquist)};
  return sample;
}

}  // namespace sonotype
