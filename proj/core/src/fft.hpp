#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace sonotype::detail {

/// In-place iterative radix-2 FFT (forward, unnormalized). Size must be a
/// power of two. Twiddles are cached per plan.
class Fft {
 public:
  explicit Fft(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  void forward(std::vector<std::complex<double>>& data) const;

 private:
  std::size_t n_;
  std::vector<std::size_t> bitrev_;
  std::vector<std::complex<double>> twiddle_;
};

bool is_power_of_two(std::size_t n) noexcept;

}  // namespace sonotype::detail
