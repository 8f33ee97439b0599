#pragma once

#include <cstddef>
#include <functional>

namespace minerwatch {

/// Worker count used by every parallel loop in the library (>= 1).
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Runs body(i) for i in [0, n). Iterations must write only to their own
/// slots; results are then independent of the worker count. The first
/// exception thrown by any iteration is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace minerwatch
