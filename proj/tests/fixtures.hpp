#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "melmix/grid.hpp"
#include "melmix/random.hpp"
#include "melmix/spectral.hpp"
#include "melmix/synth.hpp"
#include "melmix/tvcgmm.hpp"

namespace fixtures {

using melmix::Grid;

/// 220 Hz tone with harmonics at 1x, 2x, 3x.
inline melmix::AudioBuffer harmonic_tone(double seconds = 1.0, double f0 = 220.0, int sample_rate = 22050) {
  melmix::AudioBuffer a;
  a.sample_rate = sample_rate;
  const auto n = static_cast<std::size_t>(seconds * sample_rate);
  a.samples.resize(n);
  const double amps[3] = {0.4, 0.25, 0.15};
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    double v = 0.0;
    for (int h = 0; h < 3; ++h) v += amps[h] * std::sin(2.0 * std::numbers::pi * f0 * (h + 1) * t);
    a.samples[i] = v;
  }
  return a;
}

inline Grid tone_mel() {
  return melmix::mel_spectrogram(harmonic_tone(), melmix::StftConfig{}, melmix::MelConfig{}).values;
}

inline Grid checkerboard(std::size_t n) {
  Grid g(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) g(i, j) = (i + j) % 2 == 0 ? 1.0 : -1.0;
  return g;
}

inline Grid noise_grid(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  melmix::Rng rng(seed);
  Grid g(rows, cols);
  for (double& v : g.values()) v = rng.normal();
  return g;
}

inline Grid bumps(std::size_t rows, std::size_t cols) {
  Grid g(rows, cols);
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t f = 0; f < cols; ++f) {
      const double a = (t - rows * 0.3) / 3.0, b = (f - cols * 0.6) / 2.5;
      const double c = (t - rows * 0.7) / 2.0, d = (f - cols * 0.2) / 4.0;
      g(t, f) = 0.05 * f + 3.0 * std::exp(-0.5 * (a * a + b * b)) + 2.0 * std::exp(-0.5 * (c * c + d * d));
    }
  }
  return g;
}

inline Grid chirp_mel() {
  melmix::AudioBuffer a;
  const std::size_t n = 22050;
  a.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / a.sample_rate;
    a.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * (200.0 * t + 1500.0 * t * t));
  }
  return melmix::mel_spectrogram(a, melmix::StftConfig{}, melmix::MelConfig{}).values;
}

inline Grid synth_sample() {
  return melmix::generate(melmix::default_synth_spec(3), 1).records.front().spec;
}

/// The five spectrogram fixtures used for the smoothing/sharpening ordering.
inline std::vector<Grid> spectrogram_suite() {
  return {tone_mel(), chirp_mel(), synth_sample(), bumps(24, 32), noise_grid(20, 20, 11)};
}

/// Well-conditioned random mixture parameters.
inline melmix::TvcComponent random_component(melmix::Rng& rng) {
  melmix::TvcComponent c;
  c.logit = 0.5 * rng.normal();
  for (double& m : c.mean) m = rng.normal();
  for (double& d : c.chol.diag_pre) d = 0.3 + 0.4 * rng.normal();
  c.chol.l21 = 0.3 * rng.normal();
  c.chol.l31 = 0.3 * rng.normal();
  c.chol.l32 = 0.3 * rng.normal();
  return c;
}

inline melmix::TvcGmmField random_field(std::size_t rows, std::size_t cols, std::size_t k, std::uint64_t seed) {
  melmix::Rng rng(seed);
  melmix::TvcGmmField field(rows, cols, k);
  for (auto& c : field.all()) c = random_component(rng);
  return field;
}

}  // namespace fixtures
