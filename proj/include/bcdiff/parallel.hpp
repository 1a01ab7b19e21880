#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bcdiff {

// Worker count control. 0 restores the library default.
void set_threads(int n);
int max_threads();

// Parallel map over [0, n). Each index owns its output slots and no shared
// accumulator exists inside the loop, so results are bit-identical for any
// thread count. Reductions are done by the caller in index order afterwards.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) fn(static_cast<std::size_t>(i));
#else
    for (std::size_t i = 0; i < n; ++i) fn(i);
#endif
}

}  // namespace bcdiff
