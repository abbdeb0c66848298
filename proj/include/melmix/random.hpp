#pragma once

#include <cstdint>
#include <random>

namespace melmix {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed for the sub-stream addressed by (seed, a, b). Used to give every
/// spectrogram bin, sample or condition its own generator so parallel and
/// sequential runs draw identical numbers.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept;

/// mt19937_64 with platform-independent uniform and normal transforms (the
/// standard distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() noexcept;

  /// Index drawn from a discrete distribution with the given (normalised) weights.
  template <typename Weights>
  std::size_t categorical(const Weights& weights) noexcept {
    double u = uniform();
    std::size_t last = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (weights[k] <= 0.0) continue;
      last = k;
      u -= weights[k];
      if (u < 0.0) return k;
    }
    return last;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace melmix
