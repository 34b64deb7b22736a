#ifndef DECSPACE_PARALLEL_HPP
#define DECSPACE_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace decspace {

inline unsigned hardware_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

/// Calls fn(i) for every i in [0, n) on up to `threads` workers (0 = all cores).
///
/// Work is claimed in chunks from a shared counter. Callers write results into
/// slot i, so output never depends on the schedule. The first exception thrown
/// by any worker is rethrown after all workers have stopped.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn, std::size_t chunk = 0) {
  if (threads == 0) threads = hardware_threads();
  const std::size_t workers = std::min<std::size_t>(threads, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  if (chunk == 0) chunk = std::max<std::size_t>(1, n / (workers * 8));

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!stop.load(std::memory_order_relaxed)) {
      const std::size_t begin = next.fetch_add(chunk, std::memory_order_relaxed);
      if (begin >= n) break;
      const std::size_t end = std::min(n, begin + chunk);
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        stop = true;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace decspace

#endif  // DECSPACE_PARALLEL_HPP
