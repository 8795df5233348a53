#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace aiaudit {

/// Worker cap from AIAUDIT_THREADS, else the number of available cores.
inline unsigned worker_count() {
  if (const char* env = std::getenv("AIAUDIT_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(index, state) for every index in [0, n). Each worker owns one state
/// object built by make_state(), so non-thread-safe resources (model replicas)
/// are never shared. Results must be written to index-addressed slots so the
/// outcome does not depend on scheduling. The first exception is rethrown.
template <class MakeState, class Body>
void parallel_for(std::size_t n, MakeState&& make_state, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(worker_count(), n);
  if (workers <= 1) {
    auto state = make_state();
    for (std::size_t i = 0; i < n; ++i) body(i, state);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      try {
        auto state = make_state();
        for (std::size_t i = next++; i < n; i = next++) body(i, state);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace aiaudit
