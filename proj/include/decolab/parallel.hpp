#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace decolab {

/// Thread cap from DECOLAB_THREADS; 0 or unset means hardware concurrency.
inline unsigned threads_from_env() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const char* raw = std::getenv("DECOLAB_THREADS");
  if (!raw || !*raw) return hw;
  try {
    long v = std::stol(raw);
    if (v <= 0) return hw;
    return static_cast<unsigned>(v);
  } catch (const std::exception&) {
    return hw;
  }
}

/// Runs body(begin, end) over contiguous chunks of [0, count). Callers write
/// only to per-index slots, so results do not depend on the partitioning.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    body(std::size_t{0}, count);
    return;
  }
  std::vector<std::jthread> workers;
  const std::size_t chunk = (count + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    std::size_t begin = t * chunk, end = std::min(count, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&body, begin, end] { body(begin, end); });
  }
}

}  // namespace decolab
