#pragma once

#include <cstddef>
#include <functional>

namespace aghq {

/// Worker cap used by parallel_for. Defaults to $AGHQ_THREADS, else the
/// hardware concurrency. Values < 1 reset to the default.
void set_num_threads(int n);
int num_threads();

/// Calls fn(i) for i in [0, n), split into contiguous chunks across threads.
/// Results must be written to per-index slots; if any call throws, the
/// exception from the lowest index is rethrown after all workers finish.
/// Calls made from inside a worker run serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &fn);

} // namespace aghq
