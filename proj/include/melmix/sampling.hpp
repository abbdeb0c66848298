#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "melmix/grid.hpp"
#include "melmix/random.hpp"
#include "melmix/tvcgmm.hpp"

namespace melmix {

enum class SampleMode { naive, conditional };

struct SampleConfig {
  SampleMode mode = SampleMode::naive;
  std::uint64_t seed = 0;
  /// Multiplies every Cholesky factor at sampling time.
  double temperature = 1.0;

  void validate() const;
};

/// One component of the conditional distribution of (y1, y2) given y0.
struct BivariateComponent {
  std::array<double, 2> mean{};
  std::array<std::array<double, 2>, 2> covariance{};
  /// Lower Cholesky factor of `covariance`: [[c00, 0], [c10, c11]].
  double c00 = 1.0, c10 = 0.0, c11 = 1.0;
};

/// Mixture over the bivariate slice: per-component conditionals plus
/// posterior mixture weights given the known coordinate.
struct BivariateSlice {
  std::vector<BivariateComponent> components;
  std::vector<double> weights;
};

/// Conditions every component of a chain on its first coordinate.
BivariateSlice condition_on_first(std::span<const TvcComponent> components, double y_known,
                                  double temperature = 1.0);

/// One joint draw <y0, y1, y2> from a chain's mixture.
Vec3 draw_chain(std::span<const TvcComponent> components, Rng& rng, double temperature = 1.0);

/// Parallel per-chain sampling; overlapping predictions of each bin are averaged.
Grid sample_naive(const TvcGmmField& field, const SampleConfig& cfg);

/// Intermediate arrays of conditional sampling, exposed for inspection.
struct ConditionalTrace {
  Grid output;
  /// Known value of every bin along the time chain.
  Grid time_chain;
  /// y1 drawn at chain (t, f); valid for t < T-1.
  Grid drawn_next_time;
  /// y2 drawn at chain (t, f); valid for f < F-1.
  Grid drawn_next_freq;
};

/// Time-iterative sampling that conditions each chain on the value its
/// predecessor drew for it. Frequency overlaps are still averaged.
Grid sample_conditional(const TvcGmmField& field, const SampleConfig& cfg);
ConditionalTrace sample_conditional_traced(const TvcGmmField& field, const SampleConfig& cfg);

/// Dispatches on cfg.mode.
Grid sample(const TvcGmmField& field, const SampleConfig& cfg);

/// Overlap-averaged mixture means: the deterministic prediction a
/// mean-only (MSE) decoder would make.
Grid mean_field(const TvcGmmField& field);

}  // namespace melmix
