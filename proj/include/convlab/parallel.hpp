#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace convlab {

/// Keeps freed activation buffers in the heap instead of returning them to
/// the OS after every step. Safe to call repeatedly.
inline void tune_allocator() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
  }();
  (void)done;
#endif
}

/// Worker cap from CONVLAB_THREADS (0 or unset = hardware concurrency).
inline std::size_t thread_limit() {
  static const std::size_t limit = [] {
    std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const char *env = std::getenv("CONVLAB_THREADS");
    if (env == nullptr || *env == '\0') return hw;
    try {
      const long v = std::stol(env);
      return v <= 0 ? hw : static_cast<std::size_t>(v);
    } catch (...) {
      return hw;
    }
  }();
  return limit;
}

/// Runs fn(i) for i in [0, n). Each index writes only its own outputs, so the
/// result never depends on the number of workers.
template <typename Fn> void parallel_for(std::size_t n, Fn &&fn) {
  const std::size_t workers = std::min(thread_limit(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto &t : pool) t.join();
  for (auto &e : errors)
    if (e) std::rethrow_exception(e);
}

} // namespace convlab
