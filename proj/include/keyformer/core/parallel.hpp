#pragma once

#include <cstddef>
#include <functional>

#include "keyformer/core/precision.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace core {

/// Number of worker threads used when a caller passes 0.
std::size_t default_thread_count();

/// Runs fn(i) for i in [0, n) on up to `threads` threads (0 = default). Work is
/// statically partitioned. The first exception thrown by any task is rethrown
/// after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t threads = 0);

}  // namespace core
KEYFORMER_END_NAMESPACE
