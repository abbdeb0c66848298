#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "melmix/errors.hpp"
#include "melmix/spectral.hpp"
#include "oracles.hpp"

using namespace melmix;

namespace {

std::vector<double> sine(std::size_t n, double freq, double amp = 0.5, int sr = 22050) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * freq * i / sr);
  return x;
}

/// Linear-magnitude spectra built from smooth harmonic envelopes.
Grid harmonic_spectra(std::size_t frames, std::size_t bins) {
  Grid g(frames, bins);
  for (std::size_t t = 0; t < frames; ++t) {
    const double f0 = 8.0 + 2.0 * t;
    for (std::size_t k = 0; k < bins; ++k) {
      double v = 0.0;
      for (int h = 1; h <= 6; ++h) {
        const double d = (k - f0 * h) / 3.0;
        v += std::exp(-0.5 * d * d) / h;
      }
      g(t, k) = v;
    }
  }
  return g;
}

Grid project(const Grid& linear, const Grid& fb) {
  Grid out(linear.rows(), fb.rows());
  for (std::size_t t = 0; t < linear.rows(); ++t)
    for (std::size_t m = 0; m < fb.rows(); ++m) {
      double acc = 0.0;
      for (std::size_t k = 0; k < fb.cols(); ++k) acc += fb(m, k) * linear(t, k);
      out(t, m) = acc;
    }
  return out;
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_SUITE("spectral") {
  TEST_CASE("hann window is periodic") {
    const auto w = hann_window(8);
    CHECK(w[0] == doctest::Approx(0.0));
    CHECK(w[4] == doctest::Approx(1.0));
    CHECK(w[1] == doctest::Approx(w[7]));
  }

  TEST_CASE("config validation") {
    CHECK_THROWS_AS((StftConfig{512, 0, 512}.validate()), ConfigError);
    CHECK_THROWS_AS((StftConfig{512, 256, 1024}.validate()), ConfigError);
    CHECK_THROWS_AS((MelConfig{1, 0, 8000, 22050, 1e-5}.validate()), ConfigError);
    CHECK_THROWS_AS((MelConfig{80, 0, 12000, 22050, 1e-5}.validate()), ConfigError);
    CHECK_THROWS_AS((MelConfig{80, 0, 8000, 22050, 0.0}.validate()), ConfigError);
    CHECK_NOTHROW(StftConfig{}.validate());
    CHECK_NOTHROW(MelConfig{}.validate());
  }

  TEST_CASE("zero audio gives zero magnitude") {
    AudioBuffer a{std::vector<double>(4096, 0.0)};
    const Grid m = stft_magnitude(a, StftConfig{});
    CHECK(m.rows() == frame_count(4096, StftConfig{}));
    CHECK(m.cols() == 513);
    CHECK(std::all_of(m.values().begin(), m.values().end(), [](double v) { return v == 0.0; }));
  }

  TEST_CASE("frame count") {
    const StftConfig cfg{};
    CHECK(frame_count(22050, cfg) == 22050 / 256 + 1);
    CHECK(frame_count(1024, cfg) == 5);
  }

  TEST_CASE("audio shorter than the window is rejected") {
    AudioBuffer a{std::vector<double>(1000, 0.1)};
    CHECK_THROWS_AS(stft_magnitude(a, StftConfig{}), LengthError);
  }

  TEST_CASE("bin-centered sine peaks at its bin") {
    const StftConfig cfg{};
    const std::size_t k = 40;
    const double freq = k * 22050.0 / cfg.fft_size;
    AudioBuffer a{sine(8192, freq)};
    const Grid m = stft_magnitude(a, cfg);
    for (std::size_t t = 2; t + 2 < m.rows(); ++t) {
      const auto row = m.row(t);
      CHECK(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()) == k);
    }
  }

  TEST_CASE("STFT frames match a direct DFT") {
    StftConfig cfg{64, 16, 64};
    std::vector<double> x = sine(400, 1234.5, 0.7);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += 0.1 * std::cos(0.37 * i * i);
    const ComplexSpectrogram s = stft(x, cfg);
    const auto w = hann_window(64);
    for (std::size_t t : {2u, 7u, 20u}) {
      std::vector<double> frame(64);
      for (std::size_t i = 0; i < 64; ++i) frame[i] = w[i] * x[t * 16 - 32 + i];
      const auto ref = oracle::dft(frame);
      for (std::size_t k = 0; k < ref.size(); ++k) {
        CHECK(std::abs(s(t, k) - ref[k]) < 1e-9);
      }
    }
  }

  TEST_CASE("Parseval energy per frame") {
    const StftConfig cfg{};
    Rng rng(5);
    std::vector<double> x(6000);
    for (double& v : x) v = 0.3 * rng.normal();
    const ComplexSpectrogram s = stft(x, cfg);
    const auto w = hann_window(cfg.fft_size);
    for (std::size_t t = 2; t + 2 < s.frames; ++t) {
      double time_energy = 0.0;
      for (std::size_t i = 0; i < cfg.fft_size; ++i) {
        const double v = w[i] * x[t * cfg.hop_size - cfg.fft_size / 2 + i];
        time_energy += v * v;
      }
      double freq_energy = 0.0;
      for (std::size_t k = 0; k < s.bins; ++k) {
        const double weight = (k == 0 || k == s.bins - 1) ? 1.0 : 2.0;
        freq_energy += weight * std::norm(s(t, k));
      }
      freq_energy /= static_cast<double>(cfg.fft_size);
      CHECK(std::abs(freq_energy - time_energy) / time_energy < 1e-6);
    }
  }

  TEST_CASE("inverse STFT recovers the signal") {
    const StftConfig cfg{};
    const auto tone = fixtures::harmonic_tone(0.5);
    const auto y = istft(stft(tone.samples, cfg), cfg);
    REQUIRE(y.size() == (frame_count(tone.samples.size(), cfg) - 1) * cfg.hop_size);
    double err = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) err = std::max(err, std::abs(y[i] - tone.samples[i]));
    CHECK(err < 1e-9);
  }

  TEST_CASE("mel scale") {
    CHECK(hz_to_mel(700.0) == doctest::Approx(781.1728387480312).epsilon(1e-12));
    CHECK(hz_to_mel(0.0) == 0.0);
    CHECK(mel_to_hz(hz_to_mel(3210.0)) == doctest::Approx(3210.0));
  }

  TEST_CASE("filterbank rows are unit-peak unimodal triangles") {
    const MelConfig cfg{};
    const Grid fb = mel_filterbank(cfg, 1024);
    REQUIRE(fb.rows() == 80);
    REQUIRE(fb.cols() == 513);
    double prev_center = -1.0;
    for (std::size_t m = 0; m < fb.rows(); ++m) {
      const auto row = fb.row(m);
      CHECK(std::all_of(row.begin(), row.end(), [](double v) { return v >= 0.0; }));
      const auto peak = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      CHECK(row[peak] <= 1.0);
      CHECK(row[peak] > 0.0);
      for (std::size_t k = 1; k <= peak; ++k) CHECK(row[k] >= row[k - 1]);
      for (std::size_t k = peak + 1; k < row.size(); ++k) CHECK(row[k] <= row[k - 1]);
      double sum = 0.0, centroid = 0.0;
      for (std::size_t k = 0; k < row.size(); ++k) {
        sum += row[k];
        centroid += k * row[k];
      }
      centroid /= sum;
      CHECK(centroid > prev_center);
      prev_center = centroid;
    }
  }

  TEST_CASE("filterbank peaks reach one when a bin sits on the center") {
    const MelConfig cfg{4, 0.0, 11025.0, 22050, 1e-5};
    const Grid fb = mel_filterbank(cfg, 4096);
    for (std::size_t m = 0; m < fb.rows(); ++m) {
      const auto row = fb.row(m);
      CHECK(*std::max_element(row.begin(), row.end()) > 0.99);
    }
  }

  TEST_CASE("too many mel bands for the FFT resolution") {
    CHECK_THROWS_AS(mel_filterbank(MelConfig{200, 0, 8000, 22050, 1e-5}, 256), ConfigError);
  }

  TEST_CASE("silence maps to the log floor") {
    AudioBuffer a{std::vector<double>(4096, 0.0)};
    const auto mel = mel_spectrogram(a, StftConfig{}, MelConfig{});
    for (double v : mel.values.values()) CHECK(v == doctest::Approx(std::log(1e-5)));
  }

  TEST_CASE("sample rate mismatch is a config error") {
    AudioBuffer a{std::vector<double>(4096, 0.0), 16000};
    CHECK_THROWS_AS(mel_spectrogram(a, StftConfig{}, MelConfig{}), ConfigError);
  }

  TEST_CASE("doubling the amplitude raises every bin above the floor") {
    auto a = fixtures::harmonic_tone(0.5);
    auto b = a;
    for (double& v : b.samples) v *= 2.0;
    const auto ma = mel_spectrogram(a, StftConfig{}, MelConfig{}).values;
    const auto mb = mel_spectrogram(b, StftConfig{}, MelConfig{}).values;
    const double floor = std::log(1e-5);
    std::size_t above = 0;
    for (std::size_t i = 0; i < ma.size(); ++i) {
      if (ma.values()[i] > floor + 1e-9) {
        ++above;
        CHECK(mb.values()[i] > ma.values()[i]);
      }
      CHECK(mb.values()[i] >= ma.values()[i]);
    }
    CHECK(above > 0);
  }

  TEST_CASE("white noise stays above the floor everywhere") {
    Rng rng(17);
    AudioBuffer a;
    a.samples.resize(22050);
    for (double& v : a.samples) v = 0.5 * (2.0 * rng.uniform() - 1.0);
    const auto mel = mel_spectrogram(a, StftConfig{}, MelConfig{});
    CHECK(mel.values.all_finite());
    for (double v : mel.values.values()) CHECK(v > std::log(1e-5));
  }

  TEST_CASE("mel inversion re-projects within 5%") {
    const MelConfig cfg{};
    const Grid fb = mel_filterbank(cfg, 1024);
    const Grid x = harmonic_spectra(12, 513);
    const Grid mx = project(x, fb);
    for (auto method : {MelInversion::pseudo_inverse, MelInversion::nnls}) {
      const Grid xh = invert_mel_power(mx, cfg, 1024, method);
      REQUIRE(xh.rows() == 12);
      REQUIRE(xh.cols() == 513);
      CHECK(std::all_of(xh.values().begin(), xh.values().end(), [](double v) { return v >= 0.0; }));
      const Grid mxh = project(xh, fb);
      std::vector<double> diff(mx.size());
      for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = mxh.values()[i] - mx.values()[i];
      CHECK(norm(diff) / norm(mx.values()) < 0.05);
    }
  }

  TEST_CASE("zero mel power inverts to zero") {
    const Grid zero(5, 80, 0.0);
    const Grid out = invert_mel_power(zero, MelConfig{}, 1024);
    CHECK(out.rows() == 5);
    CHECK(out.cols() == 513);
    for (double v : out.values()) CHECK(v == 0.0);
  }

  TEST_CASE("mel_to_linear output shape and sign") {
    const auto mel = mel_spectrogram(fixtures::harmonic_tone(0.3), StftConfig{}, MelConfig{});
    const Grid lin = mel_to_linear(mel, 1024);
    CHECK(lin.rows() == mel.values.rows());
    CHECK(lin.cols() == 513);
    for (double v : lin.values()) CHECK(v >= 0.0);
  }

  TEST_CASE("griffin-lim reconstructs a harmonic tone") {
    const StftConfig cfg{};
    const Grid mag = stft_magnitude(fixtures::harmonic_tone(), cfg);
    const auto r = griffin_lim(mag, cfg, 22050, 60, 0.99);
    CHECK(r.spectral_convergence < 0.1);
    REQUIRE(r.history.size() == 60);
    CHECK(r.spectral_convergence <= r.history.front());
    CHECK(r.spectral_convergence <= *std::min_element(r.history.begin(), r.history.end()));
    CHECK(r.audio.samples.size() == (mag.rows() - 1) * cfg.hop_size);
  }

  TEST_CASE("griffin-lim is deterministic") {
    const StftConfig cfg{};
    const Grid mag = stft_magnitude(fixtures::harmonic_tone(0.3), cfg);
    const auto a = griffin_lim(mag, cfg, 22050, 10);
    const auto b = griffin_lim(mag, cfg, 22050, 10);
    CHECK(a.audio.samples == b.audio.samples);
    CHECK(a.history == b.history);
  }

  TEST_CASE("griffin-lim of an all-zero magnitude is silent") {
    const Grid mag(20, 513, 0.0);
    const auto r = griffin_lim(mag, StftConfig{}, 22050);
    CHECK(r.spectral_convergence == 0.0);
    for (double v : r.audio.samples) CHECK(v == 0.0);
  }

  TEST_CASE("griffin-lim argument checks") {
    const Grid mag(20, 513, 1.0);
    CHECK_THROWS_AS(griffin_lim(mag, StftConfig{}, 22050, 0), DomainError);
    CHECK_THROWS_AS(griffin_lim(mag, StftConfig{}, 22050, 10, 1.0), DomainError);
    CHECK_THROWS(griffin_lim(Grid(20, 100, 1.0), StftConfig{}, 22050));
  }
}
