#include "melmix/filters.hpp"

#include <algorithm>
#include <cmath>

#include "melmix/errors.hpp"
#include "melmix/parallel.hpp"

namespace melmix {

Kernel2D gaussian_kernel(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("gaussian sigma must be positive");
  const auto radius = static_cast<std::size_t>(std::ceil(3.0 * sigma));
  const std::size_t size = 2 * radius + 1;
  std::vector<double> taps(size);
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double x = static_cast<double>(i) - static_cast<double>(radius);
    taps[i] = std::exp(-0.5 * x * x / (sigma * sigma));
    total += taps[i];
  }
  for (double& t : taps) t /= total;
  Kernel2D k{Grid(size, size)};
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) k.weights(r, c) = taps[r] * taps[c];
  }
  return k;
}

Kernel2D laplacian_kernel() {
  return Kernel2D{Grid(3, 3, {0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0})};
}

Grid convolve2d(const Grid& grid, const Kernel2D& kernel) {
  if (grid.empty()) throw DomainError("convolve2d needs a non-empty grid");
  if (kernel.height() % 2 == 0 || kernel.width() % 2 == 0) throw DomainError("kernel dimensions must be odd");
  const auto rows = static_cast<std::ptrdiff_t>(grid.rows());
  const auto cols = static_cast<std::ptrdiff_t>(grid.cols());
  const auto ry = static_cast<std::ptrdiff_t>(kernel.height() / 2);
  const auto rx = static_cast<std::ptrdiff_t>(kernel.width() / 2);
  Grid out(grid.rows(), grid.cols());
  parallel_for(grid.rows(), [&](std::size_t r) {
    const auto y = static_cast<std::ptrdiff_t>(r);
    for (std::ptrdiff_t x = 0; x < cols; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t dy = -ry; dy <= ry; ++dy) {
        const auto sy = static_cast<std::size_t>(std::clamp(y - dy, std::ptrdiff_t{0}, rows - 1));
        for (std::ptrdiff_t dx = -rx; dx <= rx; ++dx) {
          const auto sx = static_cast<std::size_t>(std::clamp(x - dx, std::ptrdiff_t{0}, cols - 1));
          acc += kernel.weights(static_cast<std::size_t>(dy + ry), static_cast<std::size_t>(dx + rx)) * grid(sy, sx);
        }
      }
      out(r, static_cast<std::size_t>(x)) = acc;
    }
  });
  return out;
}

Grid smooth(const Grid& spec, double sigma) { return convolve2d(spec, gaussian_kernel(sigma)); }

Grid sharpen(const Grid& spec, double strength) {
  if (!(strength >= 0.0) || !std::isfinite(strength)) throw DomainError("sharpen strength must be non-negative");
  const Grid lap = convolve2d(spec, laplacian_kernel());
  Grid out = spec;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] -= strength * lap.values()[i];
  return out;
}

double var_laplacian(const Grid& spec) {
  if (spec.rows() < 3 || spec.cols() < 3) throw DomainError("var_laplacian needs a grid of at least 3x3");
  const std::size_t count = (spec.rows() - 2) * (spec.cols() - 2);
  std::vector<double> lap;
  lap.reserve(count);
  for (std::size_t t = 1; t + 1 < spec.rows(); ++t) {
    for (std::size_t f = 1; f + 1 < spec.cols(); ++f) {
      lap.push_back(spec(t - 1, f) + spec(t + 1, f) + spec(t, f - 1) + spec(t, f + 1) - 4.0 * spec(t, f));
    }
  }
  double mean = 0.0;
  for (double v : lap) mean += v;
  mean /= static_cast<double>(count);
  double var = 0.0;
  for (double v : lap) var += (v - mean) * (v - mean);
  return var / static_cast<double>(count);
}

double log_spectral_distance(const Grid& a, const Grid& b) {
  if (!a.same_shape(b)) throw DomainError("log_spectral_distance needs grids of equal shape");
  if (a.empty()) throw DomainError("log_spectral_distance needs non-empty grids");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

}  // namespace melmix
