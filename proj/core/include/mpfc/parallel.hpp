#pragma once

#include <cstddef>
#include <span>

namespace mpfc {

// Worker threads used by cell loops. Results never depend on this value:
// per-cell work is independent and every reduction goes through
// deterministic_sum.
void set_thread_count(int threads);
int thread_count();

// Applies fn(i) for i in [0, count). fn must only write cell i.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) {
    fn(static_cast<std::size_t>(i));
  }
}

// Sum with a fixed pairwise tree over fixed-size leaf blocks. The tree only
// depends on values.size(), so repeated calls and different thread counts
// produce bitwise-identical results.
double deterministic_sum(std::span<const double> values);

}  // namespace mpfc
