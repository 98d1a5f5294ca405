// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace bida {

namespace detail {
inline std::atomic<int>& thread_cap() {
  static std::atomic<int> cap{-1};
  return cap;
}
}  // namespace detail

/// Worker count used by parallel_for.  Reads BIDA_THREADS on first use
/// (0 or unset = hardware concurrency).
inline int worker_count() {
  int cap = detail::thread_cap().load();
  if (cap < 0) {
    cap = 0;
    if (const char* env = std::getenv("BIDA_THREADS")) cap = std::max(0, std::atoi(env));
    detail::thread_cap().store(cap);
  }
  if (cap == 0) cap = int(std::max(1u, std::thread::hardware_concurrency()));
  return cap;
}

inline void set_worker_count(int n) { detail::thread_cap().store(std::max(0, n)); }

/// Runs fn(i) for i in [0, n).  Each index must write disjoint output so the
/// result is independent of the worker count.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
  const int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(std::size_t(workers - 1));
  for (int w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace bida
