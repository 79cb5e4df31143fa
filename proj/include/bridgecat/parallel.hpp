#pragma once

#include <functional>

namespace bridgecat {

/// Runs fn(0..n-1) across up to `jobs` threads. Tasks write to disjoint
/// output slots indexed by i, so results are independent of scheduling;
/// callers reduce in index order when order matters.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

/// --jobs default: BRIDGECAT_JOBS environment variable, else 1.
int default_jobs();

} // namespace bridgecat
