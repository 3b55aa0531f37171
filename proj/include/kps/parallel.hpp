#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace kps {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Items are
/// independent and each is computed identically regardless of scheduling,
/// so results match the sequential run. fn must not throw; capture errors
/// inside it.
template <typename F>
void parallel_for(size_t n, size_t workers, F&& fn) {
  if (workers <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
  };
  std::vector<std::thread> threads;
  size_t spawn = std::min(workers, n) - 1;
  threads.reserve(spawn);
  for (size_t t = 0; t < spawn; ++t) threads.emplace_back(worker);
  worker();
  for (std::thread& t : threads) t.join();
}

} // namespace kps
