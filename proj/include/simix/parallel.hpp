#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace simix {

// Runs job(i) for i in [0, count) on up to `workers` threads. Jobs must write
// only to their own output slot; results therefore do not depend on the
// worker count. The first exception thrown by any job is rethrown after all
// workers have joined.
template <class Job>
void parallel_for(std::size_t count, unsigned workers, Job&& job) {
  if (count == 0) return;
  const unsigned threads =
      static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::vector<std::exception_ptr> errors(threads);

  auto worker = [&](unsigned slot) {
    try {
      for (std::size_t i = next.fetch_add(1); i < count && !failed.load();
           i = next.fetch_add(1)) {
        job(i);
      }
    } catch (...) {
      errors[slot] = std::current_exception();
      failed.store(true);
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace simix
