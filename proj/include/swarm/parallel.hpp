#ifndef SWARM_PARALLEL_HPP
#define SWARM_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace swarm {

/// Runs fn(begin, end) over `workers` contiguous slices of [0, count).
/// The calling thread processes the first slice. If several slices throw,
/// the exception of the lowest slice is rethrown.
template <class Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  if (count == 0) return;
  const std::size_t w = std::clamp<std::size_t>(workers < 1 ? 1 : static_cast<std::size_t>(workers), 1, count);
  if (w == 1) {
    fn(std::size_t{0}, count);
    return;
  }
  std::vector<std::exception_ptr> errors(w);
  auto slice = [&](std::size_t k) {
    const std::size_t begin = count * k / w;
    const std::size_t end = count * (k + 1) / w;
    try {
      fn(begin, end);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  {
    std::vector<std::jthread> threads;
    threads.reserve(w - 1);
    for (std::size_t k = 1; k < w; ++k) threads.emplace_back(slice, k);
    slice(0);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Splits [0, count) into fixed chunks of `chunk` items and runs
/// fn(chunk_index, begin, end) for each. The partition depends only on
/// `count` and `chunk`, never on `workers`, so per-chunk results are
/// identical for any thread count.
template <class Fn>
void parallel_chunks(std::size_t count, std::size_t chunk, int workers, Fn&& fn) {
  if (count == 0) return;
  chunk = std::max<std::size_t>(chunk, 1);
  const std::size_t chunks = (count + chunk - 1) / chunk;
  parallel_for(chunks, workers, [&](std::size_t c0, std::size_t c1) {
    for (std::size_t c = c0; c < c1; ++c) fn(c, c * chunk, std::min(count, (c + 1) * chunk));
  });
}

inline std::size_t chunk_count(std::size_t count, std::size_t chunk) { return (count + chunk - 1) / chunk; }

}  // namespace swarm

#endif  // SWARM_PARALLEL_HPP
