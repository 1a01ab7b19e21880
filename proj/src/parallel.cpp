#include "bcdiff/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bcdiff {

namespace {
int g_default_threads = -1;
}

void set_threads(int n) {
#ifdef _OPENMP
    if (g_default_threads < 0) g_default_threads = omp_get_max_threads();
    omp_set_num_threads(n > 0 ? n : g_default_threads);
#else
    (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace bcdiff
