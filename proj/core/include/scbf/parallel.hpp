#pragma once

#include <cstddef>
#include <functional>

namespace scbf {

/// Worker count: THREADS if set to a positive integer, else the hardware
/// concurrency (at least 1).
int worker_count();

/// Runs fn(i) for i in [0, count). Each index is processed exactly once;
/// callers write results by index, so the outcome does not depend on the
/// schedule. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace scbf
