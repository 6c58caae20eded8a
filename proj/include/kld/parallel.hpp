#pragma once

#include <cstddef>
#include <functional>

namespace kld {

/// Worker count used by the data-parallel loops. Initialised from the
/// KLD_THREADS environment variable, else the hardware concurrency.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Runs body(i) for i in [0, n) on up to thread_count() threads using a
/// static block partition. Results must be written to per-index slots so
/// the outcome does not depend on the schedule. The first exception thrown
/// by any body is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace kld
