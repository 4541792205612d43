#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace seqpm {

/// Worker budget handed down by the harness. Results never depend on it:
/// work is cut into index ranges whose boundaries are fixed by the caller,
/// and every range writes only its own output slots.
struct Parallelism {
  unsigned workers{1};

  static Parallelism hardware() {
    return {std::max(1u, std::thread::hardware_concurrency())};
  }
};

/// Runs body(chunk) for chunk in [0, chunks). Chunks are claimed in
/// round-robin by worker index, which fixes nothing about results; the
/// caller merges per-chunk outputs in chunk order.
template <typename Body>
void parallel_chunks(std::size_t chunks, Parallelism par, Body&& body) {
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(std::max(1u, par.workers), chunks));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) body(c);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = w; c < chunks; c += workers) body(c);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Index-range form: body(begin, end) over fixed-size blocks of [0, count).
template <typename Body>
void parallel_blocks(std::size_t count, std::size_t block, Parallelism par, Body&& body) {
  if (count == 0) return;
  const std::size_t chunks = (count + block - 1) / block;
  parallel_chunks(chunks, par, [&](std::size_t c) {
    body(c * block, std::min(count, (c + 1) * block));
  });
}

}  // namespace seqpm
