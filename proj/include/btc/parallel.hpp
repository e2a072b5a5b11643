#pragma once

#include <cstddef>
#include <functional>

namespace btc {

/// Hardware concurrency, at least 1.
int default_threads();

/// Calls fn(i) for i in [0, n) on up to `threads` workers. Indices are handed out
/// dynamically; callers write results into slot i so the output order is fixed.
/// The first exception thrown by any call is rethrown after all workers stop.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace btc
