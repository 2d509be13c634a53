#pragma once

#include <cstddef>
#include <functional>

namespace lle {

// Worker count: LLE_THREADS if set (>= 1), otherwise hardware concurrency.
std::size_t thread_count();

// Runs fn(i) for i in [0, n) across at most thread_count() threads. Each index
// is processed exactly once; callers write results by index so output order is
// independent of scheduling. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace lle
