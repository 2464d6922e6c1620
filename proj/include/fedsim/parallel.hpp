#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace fedsim {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items are
// handed out dynamically; callers must write results into per-index slots.
// If any items throw, the exception of the lowest failing index is
// rethrown on the calling thread, so error reporting does not depend on
// scheduling either.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto count = std::min(static_cast<std::size_t>(std::max(1, threads)), n);
  if (count <= 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(count - 1);
    for (std::size_t w = 1; w < count; ++w) pool.emplace_back(body);
    body();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace fedsim
