#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace percweb {

/// Evaluates fn(i) for i in [0, n) on `workers` threads with a static
/// interleaved partition. Results land at index i regardless of completion
/// order, so the output never depends on the worker count. The first
/// exception (by index) is rethrown after all workers join.
template <class F>
auto parallel_map(std::int64_t n, int workers, F&& fn) {
  using T = decltype(fn(std::int64_t{0}));
  std::vector<T> out(static_cast<std::size_t>(std::max<std::int64_t>(n, 0)));
  std::vector<std::exception_ptr> errors(out.size());
  const int w = static_cast<int>(std::clamp<std::int64_t>(workers, 1, std::max<std::int64_t>(n, 1)));
  auto run = [&](int id) {
    for (std::int64_t i = id; i < n; i += w) {
      try {
        out[static_cast<std::size_t>(i)] = fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  if (w == 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(w));
    for (int id = 0; id < w; ++id) pool.emplace_back(run, id);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace percweb
