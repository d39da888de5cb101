#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace avoidance {

/// Runs task(i) for i in [0, n) on `workers` threads. Tasks must be pure
/// functions of their index; each writes into its own output slot, so the
/// result is identical for every worker count. The first exception thrown by
/// any task is rethrown on the calling thread.
inline void parallel_for(std::uint64_t n, unsigned workers,
                         const std::function<void(std::uint64_t)>& task) {
  if (n == 0) return;
  if (workers <= 1 || n == 1) {
    for (std::uint64_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::uint64_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) return;
      try {
        task(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  const unsigned count = workers < n ? workers : static_cast<unsigned>(n);
  threads.reserve(count);
  for (unsigned w = 0; w < count; ++w) threads.emplace_back(body);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

/// Worker-count resolution: explicit flag (> 0) wins, then the
/// AVOIDANCE_CLT_WORKERS environment variable, then hardware concurrency.
inline unsigned resolve_workers(int flag_value) {
  if (flag_value > 0) return static_cast<unsigned>(flag_value);
  if (const char* env = std::getenv("AVOIDANCE_CLT_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

}  // namespace avoidance
