#pragma once

#include <cstddef>
#include <vector>

#include "melmix/grid.hpp"

namespace melmix {

/// Odd-sized convolution kernel stored row-major in a Grid.
struct Kernel2D {
  Grid weights;

  std::size_t height() const noexcept { return weights.rows(); }
  std::size_t width() const noexcept { return weights.cols(); }
};

/// Separable Gaussian with radius ceil(3*sigma), normalised to sum 1.
Kernel2D gaussian_kernel(double sigma);

/// 4-neighbour Laplacian [[0,1,0],[1,-4,1],[0,1,0]].
Kernel2D laplacian_kernel();

/// Same-size 2D convolution with replicate padding.
Grid convolve2d(const Grid& grid, const Kernel2D& kernel);

/// Gaussian blur of a (log-mel) grid.
Grid smooth(const Grid& spec, double sigma = 1.0);

/// Laplacian high-boost: spec - strength * (laplacian * spec).
Grid sharpen(const Grid& spec, double strength = 1.0);

/// Population variance of the Laplacian-filtered grid over its interior
/// (1-bin border excluded). Lower means smoother. Needs at least 3x3.
double var_laplacian(const Grid& spec);

/// RMS of (a - b) over all bins; both grids must share a shape.
double log_spectral_distance(const Grid& a, const Grid& b);

}  // namespace melmix
