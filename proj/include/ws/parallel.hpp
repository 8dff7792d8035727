#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <thread>
#include <vector>

namespace ws {

// Worker cap: WS_THREADS env var when set, otherwise hardware concurrency
// clamped to 8.
inline int max_threads() {
  static const int cached = [] {
    if (const char* env = std::getenv("WS_THREADS")) {
      const int n = std::atoi(env);
      if (n >= 1) return std::min(n, 64);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::clamp(hw, 1u, 8u));
  }();
  return cached;
}

// Splits [0, n) into one contiguous chunk per worker and runs
// body(begin, end) on each. Callers must only write disjoint state per
// index; under that contract the result is identical for any thread count.
template <typename F>
void parallel_for(int64_t n, F&& body) {
  if (n <= 0) return;
  const int threads = static_cast<int>(std::min<int64_t>(max_threads(), n));
  if (threads <= 1) {
    body(int64_t{0}, n);
    return;
  }
  const int64_t chunk = (n + threads - 1) / threads;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads) - 1);
  for (int t = 1; t < threads; ++t) {
    const int64_t b = t * chunk;
    const int64_t e = std::min<int64_t>(n, b + chunk);
    if (b < e) pool.emplace_back([&body, b, e] { body(b, e); });
  }
  body(int64_t{0}, std::min<int64_t>(n, chunk));
  for (auto& th : pool) th.join();
}

}  // namespace ws
