#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace bg {

/// Worker cap from BG_THREADS, else hardware concurrency. Never below 1.
inline std::size_t worker_count() {
  if (const char* env = std::getenv("BG_THREADS"); env != nullptr && *env != '\0') {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    return 1;
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, n) on up to worker_count() threads. Work is
/// split into contiguous blocks; callers write results into slot i so the
/// outcome never depends on the thread count. The first exception thrown by
/// any worker is rethrown on the calling thread.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  const std::size_t block = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * block;
    const std::size_t end = std::min(n, begin + block);
    if (begin >= end) break;
    threads.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace bg
