#pragma once

#include <functional>

namespace attsolver {

/// Runs fn(i) for i in [0, n). jobs <= 1 takes the plain serial loop (the
/// reference path used by reproducibility tests); jobs > 1 dispatches to
/// OpenMP worker threads. Per-index work must be independent and write only
/// to per-index slots; callers reduce afterwards in fixed index order, so
/// results are bitwise identical for every jobs setting.
/// The first exception thrown by any worker is rethrown on the caller.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

/// Worker count actually used for a given request (clamped to >= 1).
int effective_jobs(int jobs);

} // namespace attsolver
