#pragma once

#include <cstddef>
#include <functional>

namespace cascadecay {

// Worker count: CASCADECAY_THREADS if set (clamped to >= 1), else hardware
// concurrency. Results of every parallel operation in this library are
// independent of the worker count.
int worker_count();

// Splits [0, n) into one contiguous chunk per worker and runs fn(begin, end)
// on each. Runs inline when a single worker suffices.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace cascadecay
