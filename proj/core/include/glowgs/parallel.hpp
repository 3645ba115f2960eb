#pragma once

#include <cstddef>
#include <functional>

namespace glowgs {

/// Worker count: GLOWGS_THREADS if set and positive, otherwise hardware concurrency.
std::size_t worker_count();

/// Overrides the worker count for this process (0 restores the environment default).
void set_worker_count(std::size_t n);

/// Runs body(i) for i in [0, n). Work is split into contiguous chunks; callers that reduce
/// results must write into per-index slots and combine them in index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace glowgs
