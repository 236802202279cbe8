#pragma once

#include <functional>

namespace photoloss {

/// Number of worker threads in use; honors the PHOTOLOSS_THREADS
/// environment variable (values < 1 are treated as 1).
int thread_count();

/// Runs fn over [0, rows) split into contiguous chunks, one per worker.
/// Chunks write disjoint rows, so results do not depend on the thread
/// count; small row counts run inline on the calling thread.
void parallel_for(int rows, const std::function<void(int, int)>& fn);

}  // namespace photoloss
