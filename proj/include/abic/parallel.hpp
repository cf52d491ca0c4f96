// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace abic {

// Process-wide worker cap. Every parallel loop writes disjoint output slots,
// so results are bit-identical for any thread count.
inline int& thread_count_ref() {
  static int count = 0;  // 0 = not yet resolved
  return count;
}

inline int thread_count() {
  int& c = thread_count_ref();
  if (c == 0) {
    if (const char* env = std::getenv("ABIC_THREADS")) {
      int n = std::atoi(env);
      if (n > 0) c = n;
    }
    if (c == 0) {
      unsigned hw = std::thread::hardware_concurrency();
      c = hw == 0 ? 1 : static_cast<int>(hw);
    }
  }
  return c;
}

inline void set_thread_count(int n) { thread_count_ref() = n > 0 ? n : 1; }

// Static partition of [begin, end) across workers.
inline void parallel_for(long begin, long end, const std::function<void(long)>& body) {
  long n = end - begin;
  if (n <= 0) return;
  int workers = std::min<long>(thread_count(), n);
  if (workers <= 1) {
    for (long i = begin; i < end; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  long chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    long lo = begin + w * chunk;
    long hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (long i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace abic
