#include "melmix/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "fft.hpp"
#include "melmix/errors.hpp"

namespace melmix {

namespace {

/// Analysis window of fft_size samples: Hann(win_size) centered, zeros around.
std::vector<double> frame_window(const StftConfig& cfg) {
  std::vector<double> window(cfg.fft_size, 0.0);
  const auto hann = hann_window(cfg.win_size);
  const std::size_t offset = (cfg.fft_size - cfg.win_size) / 2;
  std::copy(hann.begin(), hann.end(), window.begin() + static_cast<std::ptrdiff_t>(offset));
  return window;
}

/// Index into a signal of `length` samples with mirror reflection (no edge repeat).
std::size_t reflect_index(std::ptrdiff_t i, std::size_t length) {
  if (length == 1) return 0;
  const auto n = static_cast<std::ptrdiff_t>(length);
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  if (i >= n) i = period - i;
  return static_cast<std::size_t>(i);
}

ComplexSpectrogram stft_with(detail::RealFft& fft, const std::vector<double>& window,
                             const std::vector<double>& samples, const StftConfig& cfg) {
  const std::size_t n = cfg.fft_size;
  const auto pad = static_cast<std::ptrdiff_t>(n / 2);
  ComplexSpectrogram out;
  out.frames = frame_count(samples.size(), cfg);
  out.bins = cfg.bins();
  out.values.resize(out.frames * out.bins);
  std::vector<double> frame(n);
  for (std::size_t t = 0; t < out.frames; ++t) {
    const auto start = static_cast<std::ptrdiff_t>(t * cfg.hop_size) - pad;
    for (std::size_t i = 0; i < n; ++i) {
      frame[i] = window[i] * samples[reflect_index(start + static_cast<std::ptrdiff_t>(i), samples.size())];
    }
    fft.forward(frame, std::span(out.values).subspan(t * out.bins, out.bins));
  }
  return out;
}

std::vector<double> istft_with(detail::RealFft& fft, const std::vector<double>& window,
                               const ComplexSpectrogram& spec, const StftConfig& cfg) {
  const std::size_t n = cfg.fft_size;
  if (spec.frames == 0) return {};
  const std::size_t padded = (spec.frames - 1) * cfg.hop_size + n;
  std::vector<double> signal(padded, 0.0);
  std::vector<double> weight(padded, 0.0);
  std::vector<double> frame(n);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    fft.inverse(std::span(spec.values).subspan(t * spec.bins, spec.bins), frame);
    const std::size_t start = t * cfg.hop_size;
    for (std::size_t i = 0; i < n; ++i) {
      signal[start + i] += window[i] * frame[i];
      weight[start + i] += window[i] * window[i];
    }
  }
  const std::size_t length = (spec.frames - 1) * cfg.hop_size;
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) {
    const std::size_t j = i + n / 2;
    out[i] = weight[j] > 1e-10 ? signal[j] / weight[j] : 0.0;
  }
  return out;
}

double spectral_convergence(const ComplexSpectrogram& estimate, const Grid& target, double target_norm) {
  double err = 0.0;
  for (std::size_t i = 0; i < estimate.values.size(); ++i) {
    const double d = std::abs(estimate.values[i]) - target.values()[i];
    err += d * d;
  }
  return std::sqrt(err) / target_norm;
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMatrix to_matrix(const Grid& g) {
  return Eigen::Map<const RowMatrix>(g.values().data(), static_cast<Eigen::Index>(g.rows()),
                                     static_cast<Eigen::Index>(g.cols()));
}

/// min 0.5||A x - y||^2 s.t. x >= 0 by FISTA, one column of Y per frame.
Eigen::MatrixXd nnls_columns(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y, Eigen::MatrixXd x) {
  const Eigen::MatrixXd gram = a.transpose() * a;
  const Eigen::MatrixXd aty = a.transpose() * y;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a * a.transpose(), Eigen::EigenvaluesOnly);
  const double lipschitz = eig.eigenvalues().maxCoeff();
  if (lipschitz <= 0.0) return x;
  Eigen::MatrixXd z = x;
  double momentum = 1.0;
  for (int it = 0; it < 300; ++it) {
    const Eigen::MatrixXd next = (z - (gram * z - aty) / lipschitz).cwiseMax(0.0);
    const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    z = next + ((momentum - 1.0) / next_momentum) * (next - x);
    x = next;
    momentum = next_momentum;
  }
  return x;
}

}  // namespace

void StftConfig::validate() const {
  if (fft_size == 0 || hop_size == 0 || win_size == 0) {
    throw ConfigError("STFT sizes must be positive");
  }
  if (hop_size > win_size || win_size > fft_size) {
    throw ConfigError("STFT sizes must satisfy hop <= win <= fft (got hop=" + std::to_string(hop_size) +
                      ", win=" + std::to_string(win_size) + ", fft=" + std::to_string(fft_size) + ")");
  }
}

void MelConfig::validate() const {
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
  if (n_mels < 2) throw ConfigError("n_mels must be at least 2");
  if (!(log_floor > 0.0)) throw ConfigError("log_floor must be positive");
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0)) {
    throw ConfigError("mel range must satisfy 0 <= f_min < f_max <= sample_rate/2");
  }
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

std::size_t frame_count(std::size_t length, const StftConfig& cfg) {
  return length / cfg.hop_size + 1;
}

ComplexSpectrogram stft(const std::vector<double>& samples, const StftConfig& cfg) {
  cfg.validate();
  if (samples.size() < cfg.win_size) {
    throw LengthError("audio has " + std::to_string(samples.size()) + " samples, fewer than win_size " +
                      std::to_string(cfg.win_size));
  }
  detail::RealFft fft(cfg.fft_size);
  return stft_with(fft, frame_window(cfg), samples, cfg);
}

std::vector<double> istft(const ComplexSpectrogram& spec, const StftConfig& cfg) {
  cfg.validate();
  if (spec.bins != cfg.bins()) throw DomainError("spectrogram bin count does not match fft_size");
  detail::RealFft fft(cfg.fft_size);
  return istft_with(fft, frame_window(cfg), spec, cfg);
}

Grid stft_magnitude(const AudioBuffer& audio, const StftConfig& cfg) {
  const auto spec = stft(audio.samples, cfg);
  Grid out(spec.frames, spec.bins);
  for (std::size_t i = 0; i < spec.values.size(); ++i) out.values()[i] = std::abs(spec.values[i]);
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Grid mel_filterbank(const MelConfig& cfg, std::size_t fft_size) {
  cfg.validate();
  const std::size_t bins = fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.f_min);
  const double mel_hi = hz_to_mel(cfg.f_max);
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
  }
  Grid bank(cfg.n_mels, bins);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double lower = edges[m];
    const double center = edges[m + 1];
    const double upper = edges[m + 2];
    bool any = false;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(fft_size);
      const double w = std::max(0.0, std::min((f - lower) / (center - lower), (upper - f) / (upper - center)));
      bank(m, k) = w;
      any = any || w > 0.0;
    }
    if (!any) {
      throw ConfigError("mel filter " + std::to_string(m) + " covers no FFT bin; reduce n_mels or raise fft_size");
    }
  }
  return bank;
}

MelSpectrogram mel_spectrogram(const AudioBuffer& audio, const StftConfig& stft_cfg, const MelConfig& mel_cfg) {
  if (audio.sample_rate != mel_cfg.sample_rate) {
    throw ConfigError("audio sample rate " + std::to_string(audio.sample_rate) +
                      " does not match mel config sample rate " + std::to_string(mel_cfg.sample_rate));
  }
  const Grid magnitude = stft_magnitude(audio, stft_cfg);
  const Grid bank = mel_filterbank(mel_cfg, stft_cfg.fft_size);
  MelSpectrogram out{Grid(magnitude.rows(), mel_cfg.n_mels), mel_cfg};
  for (std::size_t t = 0; t < magnitude.rows(); ++t) {
    const auto frame = magnitude.row(t);
    for (std::size_t m = 0; m < mel_cfg.n_mels; ++m) {
      const auto filter = bank.row(m);
      double energy = 0.0;
      for (std::size_t k = 0; k < frame.size(); ++k) energy += filter[k] * frame[k];
      out.values(t, m) = std::log(std::max(energy, mel_cfg.log_floor));
    }
  }
  return out;
}

Grid invert_mel_power(const Grid& mel_linear, const MelConfig& mel_cfg, std::size_t fft_size, MelInversion method) {
  if (mel_linear.cols() != mel_cfg.n_mels) throw ConfigError("mel grid width does not match n_mels");
  const Eigen::MatrixXd bank = to_matrix(mel_filterbank(mel_cfg, fft_size));
  const Eigen::MatrixXd pinv = bank.completeOrthogonalDecomposition().pseudoInverse();
  // Columns are frames.
  const Eigen::MatrixXd mel = to_matrix(mel_linear).transpose();
  Eigen::MatrixXd linear = (pinv * mel).cwiseMax(0.0);
  if (method == MelInversion::nnls) linear = nnls_columns(bank, mel, linear);
  Grid out(mel_linear.rows(), fft_size / 2 + 1);
  for (std::size_t t = 0; t < out.rows(); ++t) {
    for (std::size_t k = 0; k < out.cols(); ++k) {
      out(t, k) = linear(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));
    }
  }
  return out;
}

Grid mel_to_linear(const MelSpectrogram& mel, std::size_t fft_size, MelInversion method) {
  Grid power(mel.values.rows(), mel.values.cols());
  for (std::size_t i = 0; i < power.size(); ++i) power.values()[i] = std::exp(mel.values.values()[i]);
  return invert_mel_power(power, mel.config, fft_size, method);
}

GriffinLimResult griffin_lim(const Grid& magnitude, const StftConfig& cfg, int sample_rate, int n_iter,
                             double momentum) {
  cfg.validate();
  if (n_iter < 1) throw DomainError("griffin_lim needs n_iter >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("griffin_lim momentum must be in [0, 1)");
  if (magnitude.cols() != cfg.bins()) throw DomainError("magnitude grid width does not match fft_size/2+1");
  if (magnitude.rows() == 0) throw DomainError("magnitude grid has no frames");

  const std::size_t length = (magnitude.rows() - 1) * cfg.hop_size;
  GriffinLimResult result;
  result.audio.sample_rate = sample_rate;

  double norm = 0.0;
  for (double v : magnitude.values()) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    result.audio.samples.assign(length, 0.0);
    result.spectral_convergence = 0.0;
    return result;
  }
  if (length < cfg.win_size) {
    throw DomainError("magnitude grid has too few frames to re-analyse its reconstruction");
  }

  detail::RealFft fft(cfg.fft_size);
  const auto window = frame_window(cfg);
  const double beta = momentum / (1.0 + momentum);

  ComplexSpectrogram estimate{magnitude.rows(), magnitude.cols(), {}};
  estimate.values.assign(magnitude.size(), {});
  auto reconstruct = [&](const std::vector<std::complex<double>>& phase) {
    for (std::size_t i = 0; i < phase.size(); ++i) estimate.values[i] = magnitude.values()[i] * phase[i];
    return istft_with(fft, window, estimate, cfg);
  };

  std::vector<std::complex<double>> phase(magnitude.size(), {1.0, 0.0});
  std::vector<double> audio = reconstruct(phase);
  ComplexSpectrogram rebuilt = stft_with(fft, window, audio, cfg);
  ComplexSpectrogram previous{rebuilt.frames, rebuilt.bins, std::vector<std::complex<double>>(rebuilt.values.size())};

  double best = spectral_convergence(rebuilt, magnitude, norm);
  result.audio.samples = audio;

  for (int it = 0; it < n_iter; ++it) {
    for (std::size_t i = 0; i < phase.size(); ++i) {
      const std::complex<double> accelerated = rebuilt.values[i] - beta * previous.values[i];
      const double mag = std::abs(accelerated);
      phase[i] = mag > 0.0 ? accelerated / mag : std::complex<double>(1.0, 0.0);
    }
    audio = reconstruct(phase);
    std::swap(previous, rebuilt);
    rebuilt = stft_with(fft, window, audio, cfg);
    const double convergence = spectral_convergence(rebuilt, magnitude, norm);
    result.history.push_back(convergence);
    if (convergence < best) {
      best = convergence;
      result.audio.samples = audio;
    }
  }
  result.spectral_convergence = best;
  return result;
}

}  // namespace melmix
