#pragma once

#include <cstddef>
#include <functional>

namespace team {

/// Worker count used when a caller passes 0: the hardware concurrency, at
/// least 1.
unsigned default_workers();

/// Calls fn(i) for every i in [0, count) on at most `workers` threads
/// (0 = default_workers()). Each index runs exactly once. If any call throws,
/// the exception of the lowest failing index is rethrown after all workers
/// finish.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& fn);

}  // namespace team
