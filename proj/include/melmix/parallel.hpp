#pragma once

#include <cstddef>
#include <functional>

namespace melmix {

/// Number of worker threads to use: MELMIX_THREADS when set to a positive
/// integer (at most 256), the hardware concurrency otherwise.
std::size_t worker_count();

/// Calls fn(i) for every i in [0, n). Work is split into contiguous chunks;
/// callers must only write to per-index slots so results do not depend on the
/// schedule.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace melmix
