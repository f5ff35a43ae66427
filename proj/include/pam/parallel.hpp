#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace pam {

/// Worker count from PAM_THREADS (default 1). Values < 1 or unparsable fall back to 1.
inline unsigned thread_count() {
  const char* env = std::getenv("PAM_THREADS");
  if (env == nullptr) return 1;
  try {
    const long n = std::stol(env);
    return n >= 1 ? static_cast<unsigned>(n) : 1U;
  } catch (...) {
    return 1;
  }
}

/// Calls fn(i) for i in [0, n) over contiguous blocks, one block per worker.
/// fn must only write to slots owned by index i; callers reduce afterwards in
/// index order, so results do not depend on the worker count.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned workers = thread_count()) {
  workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1U, workers), std::max<std::size_t>(n, 1)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t block = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t lo = w * block, hi = std::min(n, lo + block);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace pam
