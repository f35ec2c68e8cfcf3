#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace sdecp {

// Default worker count: SDECP_THREADS if set, else hardware concurrency.
inline int default_thread_count() {
  if (const char* env = std::getenv("SDECP_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs fn(i) for i in [0, count) on up to n_threads workers. Work items must
// be independent; any item may only write state owned by its own index, so
// results are identical for every thread count. The first exception thrown
// by a worker is rethrown on the calling thread.
inline void parallel_for(std::int64_t count, int n_threads,
                         const std::function<void(std::int64_t)>& fn) {
  if (count <= 0) return;
  if (n_threads < 1) n_threads = 1;
  if (n_threads == 1 || count == 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> workers;
  int n = static_cast<int>(std::min<std::int64_t>(n_threads, count));
  workers.reserve(n);
  for (int t = 0; t < n; ++t) {
    workers.emplace_back([&] {
      while (!failed.load(std::memory_order_relaxed)) {
        std::int64_t i = next.fetch_add(1);
        if (i >= count) break;
        try {
          fn(i);
        } catch (...) {
          bool expected = false;
          if (failed.compare_exchange_strong(expected, true)) {
            error = std::current_exception();
          }
          break;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace sdecp
