#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace melmix::detail {

/// Real-input FFT of fixed size backed by FFTW. Plans are created under a
/// global lock (FFTW planning is not thread-safe); execution is.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const noexcept { return n_; }

  /// Unnormalised forward transform: n real inputs -> n/2+1 coefficients.
  void forward(std::span<const double> in, std::span<std::complex<double>> out);
  /// Inverse transform scaled by 1/n, so inverse(forward(x)) == x.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  std::size_t n_;
  double* real_ = nullptr;
  void* complex_ = nullptr;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

}  // namespace melmix::detail
