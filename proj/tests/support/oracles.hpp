#pragma once

// Independent reference computations used by the tests. None of these call
// into the library's own implementation of the quantity they check.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sonotype/error.hpp"
#include "sonotype/spectro.hpp"

namespace oracle {

/// Runs fn and reports whether it threw sonotype::Error with the given code.
bool throws_code(const std::function<void()>& fn, sonotype::Errc code);

/// Little-endian RIFF/WAVE byte stream assembled field by field.
std::vector<std::uint8_t> wav_bytes(const std::vector<std::int16_t>& samples, std::uint32_t rate = 44100,
                                    std::uint16_t format = 1, std::uint16_t channels = 1, std::uint16_t bits = 16);

/// Number of whole windows seen by sliding a window with the given hop.
std::size_t frames_by_walk(std::size_t n, std::size_t window, std::size_t overlap);

/// |sum_t x[t] w[t] e^{-2 pi i k t / n}|^2 for k = 0..n/2, in long double.
std::vector<double> dft_power(const std::vector<double>& frame, const std::vector<double>& window);

/// Tukey taper evaluated from the closed form on N points.
double tukey_closed_form(std::size_t i, std::size_t n_points, double alpha);

/// One-vs-rest AUC of class c by counting all positive/negative pairs.
double auc_pairs(const std::vector<int>& labels, const std::vector<std::vector<double>>& scores, int c);

/// AP of class c by walking the ranking (descending score, ties by index).
double ap_enumerate(const std::vector<int>& labels, const std::vector<std::vector<double>>& scores, int c);

struct Anova {
  double ssb = 0.0;
  double ssw = 0.0;
  double f = 0.0;
};
Anova anova_sums(const std::vector<std::vector<double>>& groups);

/// Least squares from normal equations in long double.
struct Line {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
};
Line least_squares(const std::vector<double>& x, const std::vector<double>& y);

/// Random 8-bit sample with identical channels and aux within [0, 1].
sonotype::EncodedSample random_sample(std::uint64_t seed, std::size_t side, std::int32_t label = 1);

}  // namespace oracle
