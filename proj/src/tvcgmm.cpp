#include "melmix/tvcgmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "melmix/errors.hpp"
#include "melmix/parallel.hpp"

namespace melmix {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

/// Pre-activation that realises a diagonal exactly at the floor (softplus ~ 4e-18).
constexpr double kFlooredPreActivation = -40.0;

double log_sum_exp(std::span<const double> v) {
  const double top = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - top);
  return top + std::log(acc);
}

std::vector<double> log_weights(std::span<const TvcComponent> components) {
  std::vector<double> logits(components.size());
  for (std::size_t k = 0; k < components.size(); ++k) logits[k] = components[k].logit;
  const double norm = log_sum_exp(logits);
  for (double& l : logits) l -= norm;
  return logits;
}

/// Per-component quantities reused across all targets of one bin.
struct Prepared {
  LowerTri3 factor;
  double log_alpha;
  double log_norm;  // log alpha_k - 0.5 * (3 log 2pi + log det Sigma)
};

std::vector<Prepared> prepare(std::span<const TvcComponent> components) {
  const auto log_alpha = log_weights(components);
  std::vector<Prepared> out(components.size());
  for (std::size_t k = 0; k < components.size(); ++k) {
    out[k].factor = components[k].chol.factor();
    out[k].log_alpha = log_alpha[k];
    out[k].log_norm = log_alpha[k] - 1.5 * kLog2Pi - out[k].factor.log_det();
  }
  return out;
}

void check_shapes(const TvcGmmField& field, std::size_t rows, std::size_t cols) {
  if (field.rows() != rows || field.cols() != cols) {
    throw DomainError("field shape " + std::to_string(field.rows()) + "x" + std::to_string(field.cols()) +
                      " does not match spectrogram shape " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (field.components() == 0) throw DomainError("field has no mixture components");
}

/// Sum over the bin's targets of log p(x), and (optionally) of its gradient
/// with respect to the bin's parameters, accumulated into `grad`.
double accumulate_bin(std::span<const TvcComponent> components, std::span<const ChainTarget> targets,
                      std::span<TvcComponent> grad) {
  const std::size_t k_count = components.size();
  const auto prepared = prepare(components);
  std::vector<double> log_terms(k_count);
  std::vector<Vec3> whitened(k_count);
  double total = 0.0;
  for (const ChainTarget& x : targets) {
    for (std::size_t k = 0; k < k_count; ++k) {
      const Vec3& mu = components[k].mean;
      const Vec3 z = prepared[k].factor.solve({x[0] - mu[0], x[1] - mu[1], x[2] - mu[2]});
      whitened[k] = z;
      log_terms[k] = prepared[k].log_norm - 0.5 * (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]);
    }
    const double lse = log_sum_exp(log_terms);
    total += lse;
    if (grad.empty()) continue;
    for (std::size_t k = 0; k < k_count; ++k) {
      const double r = std::exp(log_terms[k] - lse);
      const double alpha = std::exp(prepared[k].log_alpha);
      TvcComponent& g = grad[k];
      g.logit += r - alpha;
      if (r == 0.0) continue;
      const LowerTri3& l = prepared[k].factor;
      const Vec3& z = whitened[k];
      const Vec3 u = l.solve_transposed(z);
      for (int i = 0; i < 3; ++i) g.mean[i] += r * u[i];
      // d log N / d L_ij = u_i z_j - [i == j] / L_ii   (lower triangle)
      g.chol.diag_pre[0] += r * (u[0] * z[0] - 1.0 / l.l11);
      g.chol.diag_pre[1] += r * (u[1] * z[1] - 1.0 / l.l22);
      g.chol.diag_pre[2] += r * (u[2] * z[2] - 1.0 / l.l33);
      g.chol.l21 += r * u[1] * z[0];
      g.chol.l31 += r * u[2] * z[0];
      g.chol.l32 += r * u[2] * z[1];
    }
  }
  return total;
}

NllGradient evaluate(const TvcGmmField& field, const ChainBatch& batch, bool with_gradient) {
  check_shapes(field, batch.rows(), batch.cols());
  if (batch.samples() == 0) throw DomainError("nll needs at least one spectrogram");
  const std::size_t bins = field.bins();
  NllGradient out;
  if (with_gradient) out.gradient = TvcGmmField(field.rows(), field.cols(), field.components());
  std::vector<double> per_bin(bins);
  parallel_for(bins, [&](std::size_t b) {
    std::span<TvcComponent> grad = with_gradient ? out.gradient.bin(b) : std::span<TvcComponent>{};
    per_bin[b] = accumulate_bin(field.bin(b), batch.bin(b), grad);
  });
  const double scale = 1.0 / (static_cast<double>(bins) * static_cast<double>(batch.samples()));
  double total = 0.0;
  for (double v : per_bin) total += v;
  out.value = -total * scale;
  if (with_gradient) {
    for (std::size_t b = 0; b < bins; ++b) {
      const auto params = field.bin(b);
      auto grads = out.gradient.bin(b);
      for (std::size_t k = 0; k < params.size(); ++k) {
        TvcComponent& g = grads[k];
        g.logit *= -scale;
        for (double& m : g.mean) m *= -scale;
        for (int i = 0; i < 3; ++i) g.chol.diag_pre[i] *= -scale * sigmoid(params[k].chol.diag_pre[i]);
        g.chol.l21 *= -scale;
        g.chol.l31 *= -scale;
        g.chol.l32 *= -scale;
      }
    }
  }
  return out;
}

}  // namespace

double softplus(double x) noexcept { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw DomainError("softplus_inverse needs a positive argument");
  return y > 30.0 ? y : y + std::log(-std::expm1(-y));
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec3 LowerTri3::solve(const Vec3& rhs) const noexcept {
  const double z0 = rhs[0] / l11;
  const double z1 = (rhs[1] - l21 * z0) / l22;
  const double z2 = (rhs[2] - l31 * z0 - l32 * z1) / l33;
  return {z0, z1, z2};
}

Vec3 LowerTri3::solve_transposed(const Vec3& rhs) const noexcept {
  const double u2 = rhs[2] / l33;
  const double u1 = (rhs[1] - l32 * u2) / l22;
  const double u0 = (rhs[0] - l21 * u1 - l31 * u2) / l11;
  return {u0, u1, u2};
}

Vec3 LowerTri3::multiply(const Vec3& x) const noexcept {
  return {l11 * x[0], l21 * x[0] + l22 * x[1], l31 * x[0] + l32 * x[1] + l33 * x[2]};
}

double LowerTri3::log_det() const noexcept { return std::log(l11) + std::log(l22) + std::log(l33); }

Mat3 LowerTri3::covariance() const noexcept {
  Mat3 s{};
  s[0][0] = l11 * l11;
  s[1][0] = s[0][1] = l21 * l11;
  s[2][0] = s[0][2] = l31 * l11;
  s[1][1] = l21 * l21 + l22 * l22;
  s[2][1] = s[1][2] = l31 * l21 + l32 * l22;
  s[2][2] = l31 * l31 + l32 * l32 + l33 * l33;
  return s;
}

LowerTri3 Chol3::factor(double scale) const noexcept {
  return {scale * (softplus(diag_pre[0]) + kDiagonalFloor), scale * l21,
          scale * (softplus(diag_pre[1]) + kDiagonalFloor), scale * l31,
          scale * l32, scale * (softplus(diag_pre[2]) + kDiagonalFloor)};
}

Chol3 chol_from_covariance(const Mat3& cov) {
  auto pivot = [](double remainder, double& diag_pre) {
    const double root = std::sqrt(std::max(remainder, 0.0));
    if (root - kDiagonalFloor <= 1e-12) {
      diag_pre = kFlooredPreActivation;
    } else {
      diag_pre = softplus_inverse(root - kDiagonalFloor);
    }
    return softplus(diag_pre) + kDiagonalFloor;
  };
  Chol3 c;
  const double d0 = pivot(cov[0][0], c.diag_pre[0]);
  c.l21 = cov[1][0] / d0;
  c.l31 = cov[2][0] / d0;
  const double d1 = pivot(cov[1][1] - c.l21 * c.l21, c.diag_pre[1]);
  c.l32 = (cov[2][1] - c.l31 * c.l21) / d1;
  pivot(cov[2][2] - c.l31 * c.l31 - c.l32 * c.l32, c.diag_pre[2]);
  return c;
}

std::array<double, kParamsPerComponent> pack(const TvcComponent& c) noexcept {
  return {c.logit, c.mean[0], c.mean[1], c.mean[2], c.chol.diag_pre[0], c.chol.diag_pre[1],
          c.chol.diag_pre[2], c.chol.l21, c.chol.l31, c.chol.l32};
}

TvcComponent unpack(std::span<const double, kParamsPerComponent> p) noexcept {
  TvcComponent c;
  c.logit = p[0];
  c.mean = {p[1], p[2], p[3]};
  c.chol.diag_pre = {p[4], p[5], p[6]};
  c.chol.l21 = p[7];
  c.chol.l31 = p[8];
  c.chol.l32 = p[9];
  return c;
}

TvcGmmField::TvcGmmField(std::size_t rows, std::size_t cols, std::size_t components)
    : rows_(rows), cols_(cols), k_(components), data_(rows * cols * components) {
  if (components == 0) throw DomainError("a TVC-GMM field needs K >= 1");
}

std::vector<ChainTarget> chain_targets(const Grid& spec) {
  if (spec.rows() < 2 || spec.cols() < 2) throw DomainError("chain targets need a grid of at least 2x2");
  const std::size_t rows = spec.rows();
  const std::size_t cols = spec.cols();
  std::vector<ChainTarget> out(rows * cols);
  for (std::size_t t = 0; t < rows; ++t) {
    const std::size_t next_t = std::min(t + 1, rows - 1);
    for (std::size_t f = 0; f < cols; ++f) {
      const std::size_t next_f = std::min(f + 1, cols - 1);
      out[t * cols + f] = {spec(t, f), spec(next_t, f), spec(t, next_f)};
    }
  }
  return out;
}

ChainBatch::ChainBatch(std::span<const Grid> specs) : samples_(specs.size()) {
  if (specs.empty()) return;
  rows_ = specs.front().rows();
  cols_ = specs.front().cols();
  targets_.resize(rows_ * cols_ * samples_);
  for (std::size_t n = 0; n < samples_; ++n) {
    if (specs[n].rows() != rows_ || specs[n].cols() != cols_) {
      throw DomainError("all spectrograms in a batch must share one shape");
    }
    const auto chains = chain_targets(specs[n]);
    for (std::size_t b = 0; b < chains.size(); ++b) targets_[b * samples_ + n] = chains[b];
  }
}

std::vector<double> mixture_weights(std::span<const TvcComponent> components) {
  auto w = log_weights(components);
  for (double& v : w) v = std::exp(v);
  return w;
}

double log_density(const TvcComponent& component, const Vec3& x) {
  const LowerTri3 l = component.chol.factor();
  const Vec3& mu = component.mean;
  const Vec3 z = l.solve({x[0] - mu[0], x[1] - mu[1], x[2] - mu[2]});
  return -0.5 * (3.0 * kLog2Pi + 2.0 * l.log_det() + z[0] * z[0] + z[1] * z[1] + z[2] * z[2]);
}

double mixture_log_density(std::span<const TvcComponent> components, const Vec3& x) {
  if (components.empty()) throw DomainError("mixture needs K >= 1");
  const auto log_alpha = log_weights(components);
  std::vector<double> terms(components.size());
  for (std::size_t k = 0; k < components.size(); ++k) terms[k] = log_alpha[k] + log_density(components[k], x);
  return log_sum_exp(terms);
}

double nll(const TvcGmmField& field, const Grid& spec) {
  check_shapes(field, spec.rows(), spec.cols());
  return nll(field, ChainBatch(std::span(&spec, 1)));
}

double nll(const TvcGmmField& field, const ChainBatch& batch) { return evaluate(field, batch, false).value; }

NllGradient nll_gradient(const TvcGmmField& field, const Grid& spec) {
  check_shapes(field, spec.rows(), spec.cols());
  return nll_gradient(field, ChainBatch(std::span(&spec, 1)));
}

NllGradient nll_gradient(const TvcGmmField& field, const ChainBatch& batch) {
  return evaluate(field, batch, true);
}

}  // namespace melmix
