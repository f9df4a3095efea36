#pragma once

#include <atomic>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace lwgait {

// Process-wide worker count. 1 by default; results are bitwise identical
// for any fixed value because reductions are ordered by chunk index.
inline int& num_threads() {
  static int n = 1;
  return n;
}

inline void set_num_threads(int n) {
  num_threads() = n < 1 ? 1 : n;
}

// Static block partition of [0, n) over k chunks.
inline std::pair<int64_t, int64_t> chunk_range(int64_t n, int k, int chunk) {
  const int64_t base = n / k, rem = n % k;
  const int64_t lo = chunk * base + std::min<int64_t>(chunk, rem);
  const int64_t hi = lo + base + (chunk < rem ? 1 : 0);
  return {lo, hi};
}

// fn(i) for i in [0, n). Work items must write to disjoint locations.
inline void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
  const int k = num_threads();
  if (k <= 1 || n <= 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(k - 1));
  for (int c = 1; c < k; ++c) {
    auto [lo, hi] = chunk_range(n, k, c);
    if (lo >= hi) continue;
    pool.emplace_back([lo, hi, &fn] {
      for (int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  auto [lo0, hi0] = chunk_range(n, k, 0);
  for (int64_t i = lo0; i < hi0; ++i) fn(i);
  for (auto& t : pool) t.join();
}

// fn(chunk, lo, hi): one call per chunk. Used where each worker owns an
// accumulator that the caller then reduces in chunk order.
inline void parallel_chunks(int64_t n, int chunks,
                            const std::function<void(int, int64_t, int64_t)>& fn) {
  if (chunks <= 1 || n <= 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(chunks - 1));
  for (int c = 1; c < chunks; ++c) {
    auto [lo, hi] = chunk_range(n, chunks, c);
    pool.emplace_back([c, lo, hi, &fn] { fn(c, lo, hi); });
  }
  auto [lo0, hi0] = chunk_range(n, chunks, 0);
  fn(0, lo0, hi0);
  for (auto& t : pool) t.join();
}

}  // namespace lwgait
