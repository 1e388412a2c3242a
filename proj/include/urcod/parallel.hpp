#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace urcod {

/// Worker cap: URCOD_THREADS when set, else hardware concurrency.
inline int max_threads() {
  if (const char* env = std::getenv("URCOD_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Static partition of [0, n); results must be written to per-index slots so
/// output ordering stays deterministic.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(max_threads(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([=, &fn] {
      for (int i = t; i < n; i += workers) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace urcod
