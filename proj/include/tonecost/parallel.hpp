#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tonecost {

// Batch kernels come in two flavours: a plain serial loop kept as the
// reference implementation, and an OpenMP loop used by default. Every
// parallel kernel writes each output slot from exactly one iteration and
// keeps per-item work order-independent, so results are identical for any
// thread count.
enum class ExecPolicy { serial, parallel };

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <typename Fn>
void parallel_for(std::size_t n, ExecPolicy policy, Fn&& fn) {
  if (policy == ExecPolicy::serial) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    fn(static_cast<std::size_t>(i));
  }
#else
  for (std::size_t i = 0; i < n; ++i) fn(i);
#endif
}

}  // namespace tonecost
