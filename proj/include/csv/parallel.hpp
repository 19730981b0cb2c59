#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace csv {

// Worker-count control for the OpenMP kernels. All parallel loops in this
// project are written so results are bit-identical for any thread count:
// each output element is produced by exactly one thread with a serial inner
// loop, and reductions use total-order comparisons only.

inline void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace csv
