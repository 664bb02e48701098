#pragma once

#include <omp.h>

#include <exception>
#include <mutex>

namespace mhdlab {

void set_threads(int n);
int threads();

// Runs f(t) for t in [0, n); iterations must be independent so results do not depend on
// the schedule. The first exception thrown by any iteration is rethrown after the loop.
template <class F>
void for_each_index(int n, F&& f) {
    std::exception_ptr err;
    std::mutex m;
#pragma omp parallel for schedule(static)
    for (int t = 0; t < n; ++t) {
        try {
            f(t);
        } catch (...) {
            std::lock_guard<std::mutex> lock(m);
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
}

} // namespace mhdlab
