#pragma once

#include <cstddef>
#include <functional>

namespace rf {

/// Worker cap: RF_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on up to worker_count() threads. Each index is
/// visited once; callers write results into per-index slots so the outcome
/// does not depend on scheduling. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Keeps freed large blocks in the heap instead of returning them to the OS
/// (glibc only). Training allocates and frees many multi-megabyte matrices
/// per step; without this each one costs fresh page faults.
void tune_allocator();

}  // namespace rf
