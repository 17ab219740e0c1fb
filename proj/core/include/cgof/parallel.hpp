#pragma once

#include <cstddef>
#include <functional>

namespace cgof {

/// Worker count: `requested` when positive, else the CGOF_WORKERS environment
/// variable, else the hardware concurrency (at least 1).
int resolve_workers(int requested);

/// Runs body(i) for i in [0, count) on up to `workers` threads. Indices are
/// handed out dynamically; callers must write results by index so that the
/// outcome does not depend on scheduling. The exception thrown for the
/// smallest failing index, if any, is rethrown after all workers finish.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body);

}  // namespace cgof
