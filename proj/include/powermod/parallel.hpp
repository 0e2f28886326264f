#pragma once

#include <cstddef>
#include <functional>

namespace powermod {

/// Worker cap: POWERMOD_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t thread_budget();

/// Runs fn(0) .. fn(n-1) across up to thread_budget() threads. Each index is
/// executed exactly once; callers write results into index-addressed slots so
/// the outcome never depends on scheduling. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace powermod
