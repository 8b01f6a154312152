#pragma once

#include <cstddef>
#include <functional>

namespace hrtfnp {

/// Worker cap: HRTF_NP_THREADS when set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t worker_count();

/// Runs fn(i) for i in [0, n). Iterations must write disjoint outputs; the
/// result is then independent of the schedule. The first exception thrown by
/// any iteration is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace hrtfnp
