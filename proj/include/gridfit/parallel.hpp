#pragma once

#include <cstddef>
#include <cstdlib>
#include <thread>
#include <vector>

namespace gridfit {

// Default worker count: GRIDFIT_THREADS env var, else 1. Single-threaded
// execution is the bitwise-deterministic reference mode.
inline int default_threads() {
  if (const char* env = std::getenv("GRIDFIT_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

// Runs fn(worker, begin, end) over [0, n) split into contiguous chunks,
// one per worker. Worker w always receives the same chunk for a given
// (n, threads), so callers can merge per-worker results in worker order
// and get run-to-run reproducible sums.
template <class F>
void parallel_for(std::size_t n, int threads, F&& fn) {
  if (threads <= 1 || n == 0) {
    fn(0, std::size_t{0}, n);
    return;
  }
  std::size_t workers = std::min<std::size_t>(threads, n);
  std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    std::size_t begin = w * chunk;
    std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, w, begin, end] { fn(static_cast<int>(w), begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace gridfit
