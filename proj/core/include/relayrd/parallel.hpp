#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace relayrd {

// Runs fn(i) for i in [0, n) on up to thread_count workers. Each index writes
// only its own result slot, so outputs are identical for any thread count;
// callers merge by index order to stay deterministic.
template <typename Fn>
void run_indexed(std::size_t n, int thread_count, Fn&& fn) {
  if (n == 0) return;
  std::size_t workers = static_cast<std::size_t>(thread_count < 1 ? 1 : thread_count);
  if (workers > n) workers = n;
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace relayrd
