#pragma once

#include <cstddef>
#include <functional>

namespace glassbox {

// Worker count: GLASSBOX_THREADS if set and positive, otherwise the hardware
// concurrency (at least 1).
std::size_t worker_count();

// Calls fn(i) for every i in [0, n). Work is split into contiguous chunks, one
// per worker. fn must only write to slots owned by index i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace glassbox
