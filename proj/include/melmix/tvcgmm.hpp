#pragma once

// Trivariate-chain Gaussian mixtures over spectrogram bins.
//
// Every bin (t, f) owns K trivariate Gaussian components over the chain
// target (Y[t,f], Y[t+1,f], Y[t,f+1]). Neighbouring chains overlap, so the
// field as a whole captures local time and frequency correlation without a
// T*F-dimensional covariance.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "melmix/grid.hpp"

namespace melmix {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;

/// Added to every realised Cholesky diagonal; keeps covariances SPD and
/// bounds the likelihood of collapsed components.
inline constexpr double kDiagonalFloor = 1e-4;

/// Float count of one serialised component: logit, mean[3], diag_pre[3], l21, l31, l32.
inline constexpr std::size_t kParamsPerComponent = 10;

double softplus(double x) noexcept;
/// Inverse of softplus for y > 0.
double softplus_inverse(double y);
double sigmoid(double x) noexcept;

/// Realised lower-triangular factor
///   [[l11, 0, 0], [l21, l22, 0], [l31, l32, l33]].
struct LowerTri3 {
  double l11 = 1.0, l21 = 0.0, l22 = 1.0, l31 = 0.0, l32 = 0.0, l33 = 1.0;

  /// Solves L z = rhs.
  Vec3 solve(const Vec3& rhs) const noexcept;
  /// Solves L^T u = rhs.
  Vec3 solve_transposed(const Vec3& rhs) const noexcept;
  Vec3 multiply(const Vec3& x) const noexcept;
  /// log det L = sum(log diag); log det Sigma is twice this.
  double log_det() const noexcept;
  /// Sigma = L L^T.
  Mat3 covariance() const noexcept;
};

/// Unconstrained Cholesky parameterisation: diagonal entries are
/// softplus(diag_pre[i]) + kDiagonalFloor, off-diagonals are free.
struct Chol3 {
  Vec3 diag_pre{};
  double l21 = 0.0;
  double l31 = 0.0;
  double l32 = 0.0;

  /// Realised factor, optionally multiplied by `scale` (sampling temperature).
  LowerTri3 factor(double scale = 1.0) const noexcept;

  friend bool operator==(const Chol3&, const Chol3&) = default;
};

/// Chol3 whose factor reproduces `cov`. Pivots that fall below the diagonal
/// floor (singular or near-singular covariances) are pinned to the floor.
Chol3 chol_from_covariance(const Mat3& cov);

struct TvcComponent {
  double logit = 0.0;
  Vec3 mean{};
  Chol3 chol;

  friend bool operator==(const TvcComponent&, const TvcComponent&) = default;
};

std::array<double, kParamsPerComponent> pack(const TvcComponent& c) noexcept;
TvcComponent unpack(std::span<const double, kParamsPerComponent> p) noexcept;

/// T x F grid of K mixture components per bin, stored bin-major then
/// component-major. Also used as the container for NLL gradients, where each
/// member holds the partial derivative of the matching parameter.
class TvcGmmField {
 public:
  TvcGmmField() = default;
  TvcGmmField(std::size_t rows, std::size_t cols, std::size_t components);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t components() const noexcept { return k_; }
  std::size_t bins() const noexcept { return rows_ * cols_; }

  std::span<TvcComponent> bin(std::size_t t, std::size_t f) { return bin(t * cols_ + f); }
  std::span<const TvcComponent> bin(std::size_t t, std::size_t f) const { return bin(t * cols_ + f); }
  std::span<TvcComponent> bin(std::size_t index) { return {data_.data() + index * k_, k_}; }
  std::span<const TvcComponent> bin(std::size_t index) const { return {data_.data() + index * k_, k_}; }

  std::span<TvcComponent> all() noexcept { return data_; }
  std::span<const TvcComponent> all() const noexcept { return data_; }

  friend bool operator==(const TvcGmmField&, const TvcGmmField&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t k_ = 0;
  std::vector<TvcComponent> data_;
};

/// (Y[t,f], Y[t+1,f], Y[t,f+1]); the last row and column replicate themselves.
using ChainTarget = Vec3;

/// Chain targets of a spectrogram, row-major T x F. Needs T >= 2 and F >= 2.
std::vector<ChainTarget> chain_targets(const Grid& spec);

/// Chain targets of N same-shape spectrograms, grouped by bin so the N
/// targets of one bin are contiguous.
class ChainBatch {
 public:
  explicit ChainBatch(std::span<const Grid> specs);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t samples() const noexcept { return samples_; }
  std::span<const ChainTarget> bin(std::size_t index) const {
    return {targets_.data() + index * samples_, samples_};
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t samples_ = 0;
  std::vector<ChainTarget> targets_;
};

/// Mixture weights softmax(logits).
std::vector<double> mixture_weights(std::span<const TvcComponent> components);

double log_density(const TvcComponent& component, const Vec3& x);

/// log sum_k alpha_k N(x; mu_k, Sigma_k), evaluated with logsumexp.
double mixture_log_density(std::span<const TvcComponent> components, const Vec3& x);

/// Mean over bins of -mixture_log_density at the chain targets of `spec`.
double nll(const TvcGmmField& field, const Grid& spec);
/// Mean over samples and bins.
double nll(const TvcGmmField& field, const ChainBatch& batch);

struct NllGradient {
  double value = 0.0;
  TvcGmmField gradient;
};

/// Exact partials of nll() with respect to every logit, mean entry and
/// Cholesky parameter (pre-activation for the diagonal).
NllGradient nll_gradient(const TvcGmmField& field, const Grid& spec);
NllGradient nll_gradient(const TvcGmmField& field, const ChainBatch& batch);

}  // namespace melmix
