#pragma once

#include <cstddef>
#include <functional>

namespace swgs {

/// Worker count from SWGS_THREADS, else 1.
unsigned default_threads();

/// Runs body(i) for i in [0, n) on up to `threads` workers using static
/// contiguous chunks. Callers write results into index-addressed storage,
/// so output does not depend on the worker count.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

} // namespace swgs
