#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "melmix/grid.hpp"

namespace melmix {

/// Mono PCM audio. Samples are nominally in [-1, 1]; write_wav clips.
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 22050;
};

struct StftConfig {
  std::size_t fft_size = 1024;
  std::size_t hop_size = 256;
  std::size_t win_size = 1024;

  /// Throws ConfigError unless 0 < hop <= win <= fft.
  void validate() const;
  std::size_t bins() const noexcept { return fft_size / 2 + 1; }
};

struct MelConfig {
  std::size_t n_mels = 80;
  double f_min = 0.0;
  double f_max = 8000.0;
  int sample_rate = 22050;
  double log_floor = 1e-5;

  void validate() const;
};

/// Log-mel grid (frames x n_mels, natural log) with the configuration that made it.
struct MelSpectrogram {
  Grid values;
  MelConfig config;
};

/// Complex STFT, frames x (fft_size/2 + 1).
struct ComplexSpectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<std::complex<double>> values;

  std::complex<double>& operator()(std::size_t t, std::size_t k) { return values[t * bins + k]; }
  std::complex<double> operator()(std::size_t t, std::size_t k) const { return values[t * bins + k]; }
};

enum class MelInversion { pseudo_inverse, nnls };

struct GriffinLimResult {
  AudioBuffer audio;
  /// ||  |STFT(audio)| - M ||_F / ||M||_F of the returned (best) iterate.
  double spectral_convergence = 0.0;
  /// Convergence of the estimate produced at each iteration.
  std::vector<double> history;
};

/// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

/// Number of frames produced for a signal of `length` samples.
std::size_t frame_count(std::size_t length, const StftConfig& cfg);

/// Centered STFT: the signal is reflect-padded by fft_size/2 so frame t is
/// centered on sample t*hop. Throws LengthError if audio is shorter than win_size.
ComplexSpectrogram stft(const std::vector<double>& samples, const StftConfig& cfg);

/// Least-squares overlap-add inverse of stft(); returns (frames-1)*hop samples.
std::vector<double> istft(const ComplexSpectrogram& spec, const StftConfig& cfg);

/// |stft(audio)| as a frames x bins grid.
Grid stft_magnitude(const AudioBuffer& audio, const StftConfig& cfg);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// HTK-scale triangular filters with unit peak, n_mels x (fft_size/2 + 1).
/// Throws ConfigError if any filter covers no FFT bin.
Grid mel_filterbank(const MelConfig& cfg, std::size_t fft_size);

MelSpectrogram mel_spectrogram(const AudioBuffer& audio, const StftConfig& stft_cfg,
                               const MelConfig& mel_cfg);

/// Maps a linear-amplitude mel grid (frames x n_mels) back to linear STFT
/// magnitudes (frames x bins). All outputs are >= 0.
Grid invert_mel_power(const Grid& mel_linear, const MelConfig& mel_cfg, std::size_t fft_size,
                      MelInversion method = MelInversion::pseudo_inverse);

/// exp() of the log-mel grid followed by invert_mel_power.
Grid mel_to_linear(const MelSpectrogram& mel, std::size_t fft_size,
                   MelInversion method = MelInversion::pseudo_inverse);

/// Fast Griffin-Lim with momentum, starting from zero phase. Deterministic.
GriffinLimResult griffin_lim(const Grid& magnitude, const StftConfig& cfg, int sample_rate,
                             int n_iter = 60, double momentum = 0.99);

}  // namespace melmix
