#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace chronotag {

// Splits [0, n) into `threads` contiguous chunks and runs fn(begin, end, chunk)
// on each. Chunk boundaries depend only on (n, threads), so callers that
// reduce per-chunk results in chunk order are deterministic for a fixed
// thread count. The first exception thrown by any chunk is rethrown.
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    fn(std::size_t{0}, n, std::size_t{0});
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t k = 0; k < threads; ++k) {
    const std::size_t begin = n * k / threads;
    const std::size_t end = n * (k + 1) / threads;
    pool.emplace_back([&, begin, end, k] {
      try {
        fn(begin, end, k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace chronotag
