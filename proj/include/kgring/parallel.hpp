#pragma once

#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace kgring {

// Runs fn(i) for i in [0, n) on `width` threads. Each index writes only its
// own output slot, so results do not depend on scheduling.
template <class Fn>
void parallel_for(int n, int width, Fn&& fn) {
  if (width <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (int i; (i = next.fetch_add(1)) < n;) {
      if (failed) return;
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(width, n); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace kgring
