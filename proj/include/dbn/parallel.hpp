#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace dbn {

// Process-wide worker count used by the data-parallel loops.
void set_num_threads(std::size_t n);
std::size_t num_threads();

// Split [0, n) into contiguous chunks and run fn(begin, end) on each.
// Chunk boundaries depend only on n and the thread count, so any reduction a
// caller performs in chunk order is reproducible.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min(num_threads(), n);
  if (workers <= 1) {
    if (n > 0) fn(std::size_t{0}, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
}

}  // namespace dbn
