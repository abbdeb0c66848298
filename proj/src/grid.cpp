#include "melmix/grid.hpp"

#include <algorithm>
#include <cmath>

#include "melmix/errors.hpp"

namespace melmix {

Grid::Grid(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw DomainError("grid value count does not match rows*cols");
  }
}

bool Grid::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace melmix
