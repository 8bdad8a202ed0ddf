#include "mpfc/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <vector>

namespace mpfc {

namespace {

constexpr std::size_t kLeafBlock = 512;

double tree_sum(std::span<const double> values) {
  if (values.size() <= 2) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return tree_sum(values.first(half)) + tree_sum(values.subspan(half));
}

}  // namespace

void set_thread_count(int threads) { omp_set_num_threads(std::max(1, threads)); }

int thread_count() { return omp_get_max_threads(); }

double deterministic_sum(std::span<const double> values) {
  const std::size_t blocks = (values.size() + kLeafBlock - 1) / kLeafBlock;
  if (blocks <= 1) return tree_sum(values);
  std::vector<double> partial(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t begin = b * kLeafBlock;
    const std::size_t len = std::min(kLeafBlock, values.size() - begin);
    partial[b] = tree_sum(values.subspan(begin, len));
  });
  return tree_sum(partial);
}

}  // namespace mpfc
