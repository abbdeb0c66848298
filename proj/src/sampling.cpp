#include "melmix/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "melmix/errors.hpp"
#include "melmix/parallel.hpp"

namespace melmix {

namespace {

/// Averages the three overlapping predictions of every bin:
/// own y0, y1 of chain (t-1, f) and y2 of chain (t, f-1).
Grid overlap_average(const std::vector<Vec3>& chains, std::size_t rows, std::size_t cols) {
  Grid out(rows, cols);
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t f = 0; f < cols; ++f) {
      double sum = chains[t * cols + f][0];
      int count = 1;
      if (t > 0) {
        sum += chains[(t - 1) * cols + f][1];
        ++count;
      }
      if (f > 0) {
        sum += chains[t * cols + f - 1][2];
        ++count;
      }
      out(t, f) = sum / count;
    }
  }
  return out;
}

Rng bin_rng(std::uint64_t seed, std::size_t t, std::size_t f) { return Rng(stream_seed(seed, t, f)); }

}  // namespace

void SampleConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw DomainError("temperature must be positive");
}

BivariateSlice condition_on_first(std::span<const TvcComponent> components, double y_known, double temperature) {
  if (components.empty()) throw DomainError("cannot condition an empty mixture");
  if (!std::isfinite(y_known)) throw DomainError("known value must be finite");
  BivariateSlice slice;
  slice.components.resize(components.size());
  slice.weights.resize(components.size());
  const auto alpha = mixture_weights(components);
  std::vector<double> log_post(components.size());
  for (std::size_t k = 0; k < components.size(); ++k) {
    const LowerTri3 l = components[k].chol.factor(temperature);
    const Mat3 s = l.covariance();
    const Vec3& mu = components[k].mean;
    const double delta = y_known - mu[0];
    BivariateComponent& b = slice.components[k];
    b.mean = {mu[1] + s[1][0] * delta / s[0][0], mu[2] + s[2][0] * delta / s[0][0]};
    b.covariance[0][0] = s[1][1] - s[1][0] * s[1][0] / s[0][0];
    b.covariance[0][1] = b.covariance[1][0] = s[2][1] - s[2][0] * s[1][0] / s[0][0];
    b.covariance[1][1] = s[2][2] - s[2][0] * s[2][0] / s[0][0];
    // The Schur complement of L L^T is the trailing 2x2 block of L times its transpose.
    b.c00 = l.l22;
    b.c10 = l.l32;
    b.c11 = l.l33;
    log_post[k] = std::log(alpha[k]) - 0.5 * std::log(2.0 * std::numbers::pi * s[0][0]) -
                  0.5 * delta * delta / s[0][0];
  }
  double top = -std::numeric_limits<double>::infinity();
  for (double v : log_post) top = std::max(top, v);
  double total = 0.0;
  for (std::size_t k = 0; k < log_post.size(); ++k) {
    slice.weights[k] = std::exp(log_post[k] - top);
    total += slice.weights[k];
  }
  for (double& w : slice.weights) w /= total;
  return slice;
}

Vec3 draw_chain(std::span<const TvcComponent> components, Rng& rng, double temperature) {
  const auto alpha = mixture_weights(components);
  const TvcComponent& c = components[rng.categorical(alpha)];
  const Vec3 eps{rng.normal(), rng.normal(), rng.normal()};
  const Vec3 offset = c.chol.factor(temperature).multiply(eps);
  return {c.mean[0] + offset[0], c.mean[1] + offset[1], c.mean[2] + offset[2]};
}

Grid sample_naive(const TvcGmmField& field, const SampleConfig& cfg) {
  cfg.validate();
  const std::size_t rows = field.rows();
  const std::size_t cols = field.cols();
  std::vector<Vec3> chains(field.bins());
  parallel_for(field.bins(), [&](std::size_t b) {
    Rng rng = bin_rng(cfg.seed, b / cols, b % cols);
    chains[b] = draw_chain(field.bin(b), rng, cfg.temperature);
  });
  return overlap_average(chains, rows, cols);
}

ConditionalTrace sample_conditional_traced(const TvcGmmField& field, const SampleConfig& cfg) {
  cfg.validate();
  const std::size_t rows = field.rows();
  const std::size_t cols = field.cols();
  ConditionalTrace trace{Grid(rows, cols), Grid(rows, cols), Grid(rows, cols), Grid(rows, cols)};
  std::vector<Rng> streams;
  streams.reserve(field.bins());
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t f = 0; f < cols; ++f) streams.push_back(bin_rng(cfg.seed, t, f));
  }

  // First frame: draw the known value from the marginal mixture of dim 0.
  for (std::size_t f = 0; f < cols; ++f) {
    const auto comps = field.bin(0, f);
    Rng& rng = streams[f];
    const TvcComponent& c = comps[rng.categorical(mixture_weights(comps))];
    trace.time_chain(0, f) = c.mean[0] + c.chol.factor(cfg.temperature).l11 * rng.normal();
  }

  for (std::size_t t = 0; t < rows; ++t) {
    parallel_for(cols, [&](std::size_t f) {
      Rng& rng = streams[t * cols + f];
      const BivariateSlice slice = condition_on_first(field.bin(t, f), trace.time_chain(t, f), cfg.temperature);
      const BivariateComponent& b = slice.components[rng.categorical(slice.weights)];
      const double e0 = rng.normal();
      const double e1 = rng.normal();
      const double next_time = b.mean[0] + b.c00 * e0;
      const double next_freq = b.mean[1] + b.c10 * e0 + b.c11 * e1;
      trace.drawn_next_time(t, f) = next_time;
      trace.drawn_next_freq(t, f) = next_freq;
      if (t + 1 < rows) trace.time_chain(t + 1, f) = next_time;
    });
  }

  for (std::size_t t = 0; t < rows; ++t) {
    trace.output(t, 0) = trace.time_chain(t, 0);
    for (std::size_t f = 1; f < cols; ++f) {
      trace.output(t, f) = 0.5 * (trace.time_chain(t, f) + trace.drawn_next_freq(t, f - 1));
    }
  }
  return trace;
}

Grid sample_conditional(const TvcGmmField& field, const SampleConfig& cfg) {
  return sample_conditional_traced(field, cfg).output;
}

Grid sample(const TvcGmmField& field, const SampleConfig& cfg) {
  return cfg.mode == SampleMode::naive ? sample_naive(field, cfg) : sample_conditional(field, cfg);
}

Grid mean_field(const TvcGmmField& field) {
  std::vector<Vec3> chains(field.bins());
  for (std::size_t b = 0; b < field.bins(); ++b) {
    const auto comps = field.bin(b);
    const auto alpha = mixture_weights(comps);
    Vec3 m{};
    for (std::size_t k = 0; k < comps.size(); ++k) {
      for (int i = 0; i < 3; ++i) m[i] += alpha[k] * comps[k].mean[i];
    }
    chains[b] = m;
  }
  return overlap_average(chains, field.rows(), field.cols());
}

}  // namespace melmix
