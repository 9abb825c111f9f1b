#pragma once

#include <cstddef>
#include <functional>

namespace circpred {

/// Worker count used when a caller passes threads == 0.
/// Reads CIRCPRED_THREADS, falling back to hardware_concurrency().
std::size_t default_thread_count();

/// Runs body(i) for every i in [0, count) on up to `threads` workers
/// (0 = default_thread_count()). Indices are handed out dynamically, so
/// bodies must write only to slots owned by their index; the result is then
/// independent of the worker count. The first exception thrown by any body
/// is rethrown on the calling thread after all workers finish.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace circpred
