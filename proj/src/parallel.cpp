#include "attsolver/parallel.hpp"

#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace attsolver {

int effective_jobs(int jobs) { return jobs < 1 ? 1 : jobs; }

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
    jobs = effective_jobs(jobs);
    if (jobs == 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
#ifdef _OPENMP
    std::exception_ptr first_error = nullptr;
    std::mutex error_mutex;
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
    for (int i = 0; i < n; ++i) {
        try {
            fn(i);
        } catch (...) {
            // Exceptions must not unwind through the OpenMP region.
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);
#else
    for (int i = 0; i < n; ++i) fn(i);
#endif
}

} // namespace attsolver
