#pragma once

#include <cstddef>
#include <functional>

namespace lgcd {

// Process-wide worker count used by parallel_for. 0 means hardware concurrency.
void set_thread_count(unsigned threads);
unsigned thread_count();

// Runs body(i) for i in [0, count). Work is split into contiguous blocks; each
// index is visited exactly once and callers write results into per-index
// slots, so output never depends on the worker count. Calls made from inside
// a worker run sequentially.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

} // namespace lgcd
