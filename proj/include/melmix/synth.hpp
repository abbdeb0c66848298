#pragma once

// Synthetic conditioned spectrogram data with known multimodal ground truth.
//
// Each condition owns M mode patterns. A sample picks one mode for the whole
// grid and adds a stationary separable AR(1) noise field, so every bin has an
// M-component Gaussian mixture marginal and neighbouring bins are correlated
// with coefficients rho_t (time) and rho_f (frequency).

#include <cstdint>
#include <string>
#include <vector>

#include "melmix/grid.hpp"
#include "melmix/tvcgmm.hpp"

namespace melmix {

struct ConditionSpec {
  std::vector<double> weights;
  std::vector<Grid> patterns;
  double noise_std = 0.4;
  double rho_t = 0.5;
  double rho_f = 0.5;
};

struct SynthSpec {
  std::size_t rows = 16;
  std::size_t cols = 16;
  std::uint64_t seed = 0;
  std::vector<ConditionSpec> conditions;

  /// Throws DomainError naming the offending condition and field.
  void validate() const;
};

/// 4 conditions, 16x16, two modes each: smooth bumps whose second mode is
/// lifted by 2.5, values within [0, 5]. sigma_n = 0.4, rho_t = rho_f = 0.5.
SynthSpec default_synth_spec(std::uint64_t seed = 0);

struct DatasetRecord {
  std::uint32_t condition = 0;
  Grid spec;
};

struct ConditionedDataset {
  std::size_t n_conditions = 0;
  std::vector<DatasetRecord> records;

  /// Spectrograms of one condition, in record order.
  std::vector<Grid> condition_specs(std::uint32_t condition) const;
};

/// Samples are ordered condition-major. Deterministic given spec.seed; every
/// (condition, sample) pair has its own random stream.
ConditionedDataset generate(const SynthSpec& spec, std::size_t samples_per_condition);

/// Stationary separable AR(1) noise field with marginal std `noise_std`.
class Rng;
Grid ar_noise_field(std::size_t rows, std::size_t cols, double noise_std, double rho_t, double rho_f, Rng& rng);

struct UnivariateMixture {
  std::vector<double> weights;
  std::vector<double> means;
  double std_dev = 1.0;

  double mean() const;
  double cdf(double x) const;
};

/// Exact marginal of bin (t, f) under `generate`.
UnivariateMixture true_bin_marginal(const SynthSpec& spec, std::size_t condition, std::size_t t, std::size_t f);

/// TVC-GMM field holding the generating distribution of the chain targets
/// (one component per mode, exact AR covariances; replicated edge targets
/// are degenerate and get floored Cholesky pivots).
TvcGmmField generating_field(const SynthSpec& spec, std::size_t condition);

enum class Axis { time, frequency };

struct Histogram {
  std::vector<double> edges;  // bins + 1 entries
  std::vector<std::size_t> counts;

  std::size_t total() const;
};

/// Distribution of one condition's values marginalised over `axis`:
/// Axis::time pools all frames of mel bin `index`, Axis::frequency pools all
/// mel bins of frame `index`, across every record of the condition. The 64
/// (default) uniform bins span the observed range.
Histogram marginal_histogram(const ConditionedDataset& data, std::uint32_t condition, Axis axis,
                             std::size_t index, std::size_t bins = 64);

/// "bin_low,bin_high,count" CSV with a header line.
std::string histogram_csv(const Histogram& h);

}  // namespace melmix
