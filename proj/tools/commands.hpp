#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "melmix/spectral.hpp"
#include "melmix/synth.hpp"

namespace melmix::cli {

/// Runs the melmix command line on `args` (without the program name).
/// Data goes to `out`, diagnostics to `err`. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct StudyOptions {
  std::uint64_t seed = 0;
  std::size_t steps = 2000;
  double learning_rate = 0.01;
  /// Samples drawn per (model, mode, condition) row.
  std::size_t samples = 20;
  int gl_iters = 60;
  double gl_momentum = 0.99;
};

/// Rows for ground truth and {mse, tvcgmm-k1, tvcgmm-k5} x {mean, naive,
/// conditional} per condition. Columns model,mode,condition,var_l,nll,lsd.
std::string study_csv(const ConditionedDataset& data, const StudyOptions& opts);

/// Griffin-Lim rows for the unmodified, smoothed and sharpened mel of `audio`.
std::string study_wav_csv(const AudioBuffer& audio, const StudyOptions& opts);

/// Log-mel analysis with the default STFT and an n_mels filterbank at the
/// audio sample rate.
MelSpectrogram analyze(const AudioBuffer& audio, std::size_t n_mels = 80);

/// Mel inversion followed by Griffin-Lim. Stores the spectral convergence in
/// `convergence` when given.
AudioBuffer vocode(const MelSpectrogram& mel, int iters = 60, double momentum = 0.99,
                   MelInversion method = MelInversion::pseudo_inverse, double* convergence = nullptr);

/// LSD between `reference` and analyze(vocode(input)), where input carries
/// the reference configuration.
double resynthesis_lsd(const MelSpectrogram& reference, const Grid& input, int iters = 60,
                       double momentum = 0.99);

}  // namespace melmix::cli
