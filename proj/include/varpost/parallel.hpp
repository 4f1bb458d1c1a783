#pragma once

#include <cstddef>
#include <functional>

namespace varpost {

// Runs body(i) for i in [0, count) on up to `threads` workers. Indices are
// handed out in contiguous chunks; callers write results into preallocated
// slots, so output never depends on scheduling. The first exception thrown
// by any task is rethrown after all workers join.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace varpost
