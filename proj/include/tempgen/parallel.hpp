#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace tempgen {

// Worker cap: TEMPGEN_THREADS if set and positive, else hardware concurrency.
inline int worker_count() {
  if (const char* env = std::getenv("TEMPGEN_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n). Each index runs exactly once; callers write
// results into per-index slots so the outcome does not depend on scheduling.
// The first exception is rethrown after all workers stop.
template <typename F>
void parallel_for(std::size_t n, F&& fn, int workers = worker_count()) {
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto run = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!err) err = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < w; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace tempgen
