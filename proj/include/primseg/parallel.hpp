#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace primseg {

/// Worker count used by library loops. Initialized from PRIMSEG_THREADS when
/// set, otherwise the hardware concurrency.
int num_threads();
void set_num_threads(int n);

/// Runs body(i) for i in [0, n) over contiguous chunks. Bodies must write only
/// to slots owned by i; results are then independent of the thread count.
template <typename Body>
void parallel_for(std::ptrdiff_t n, Body&& body) {
  const int workers = static_cast<int>(std::min<std::ptrdiff_t>(num_threads(), n));
  if (workers <= 1 || n < 64) {
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  const std::ptrdiff_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::ptrdiff_t lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::ptrdiff_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace primseg
