#pragma once

#include <cstdint>
#include <functional>

namespace dsf {

/// Number of worker threads used by parallel_for. Defaults to the hardware
/// concurrency, capped by the DSF_THREADS environment variable when set.
int worker_threads();

/// Runs body(begin, end) over a partition of [0, n). Chunks are contiguous
/// and disjoint, so writes to per-index output slots never race. Reduction
/// order inside one chunk is whatever the body does serially; results are
/// therefore identical for any thread count as long as chunks only write
/// their own indices.
void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& body);

}  // namespace dsf
