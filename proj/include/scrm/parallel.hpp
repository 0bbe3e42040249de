#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace scrm {

/// Worker count from SCRM_THREADS (>= 1), else the hardware concurrency.
/// SCRM_THREADS=1 runs everything on the calling thread.
inline std::size_t thread_count() {
  if (const char* env = std::getenv("SCRM_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(task) for task in [0, n_tasks). Tasks are claimed in order by up to
/// thread_count() workers; callers keep results per task and merge them in
/// task order, so the outcome does not depend on the worker count.
template <class Fn>
void parallel_for(std::size_t n_tasks, Fn&& fn) {
  const std::size_t workers = std::min(thread_count(), n_tasks);
  if (workers <= 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) fn(t);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr error;
  const auto work = [&] {
    while (true) {
      std::size_t t;
      {
        std::lock_guard lock(mu);
        if (next >= n_tasks || error) return;
        t = next++;
      }
      try {
        fn(t);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w + 1 < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Splits [0, n) into at most `chunks` contiguous ranges.
inline std::vector<std::pair<std::size_t, std::size_t>> chunk_ranges(std::size_t n,
                                                                     std::size_t chunks) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (n == 0) return out;
  chunks = std::clamp<std::size_t>(chunks, 1, n);
  for (std::size_t c = 0; c < chunks; ++c) out.emplace_back(n * c / chunks, n * (c + 1) / chunks);
  return out;
}

}  // namespace scrm
