#pragma once

#include <cstddef>
#include <functional>

namespace corrfactor {

/// Worker count for parallel sections: `requested` if nonzero, otherwise
/// hardware concurrency, in both cases capped by the CORRFACTOR_THREADS
/// environment variable when set.
unsigned worker_count(unsigned requested = 0);

/// Runs fn(batch_index) for batch_index in [0, num_batches) across workers.
/// Batch indices are handed out in order; callers that merge integer tallies
/// or index-keyed sets get thread-count-independent results.
void parallel_batches(std::size_t num_batches, unsigned workers,
                      const std::function<void(std::size_t)>& fn);

}  // namespace corrfactor
