#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace prelog {

// Runs fn(c) for c = 0..n_chunks-1 on up to `workers` threads and returns the
// results indexed by chunk. Callers derive all randomness from the chunk
// index, so the output is the same for any worker count.
template <typename Result, typename Fn>
std::vector<Result> run_chunks(std::uint64_t n_chunks, int workers, Fn&& fn) {
  std::vector<Result> out(n_chunks);
  const int w = static_cast<int>(std::clamp<std::uint64_t>(
      static_cast<std::uint64_t>(std::max(workers, 1)), 1, std::max<std::uint64_t>(n_chunks, 1)));
  if (w == 1) {
    for (std::uint64_t c = 0; c < n_chunks; ++c) {
      out[c] = fn(c);
    }
    return out;
  }
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::uint64_t c = next.fetch_add(1);
      if (c >= n_chunks) {
        return;
      }
      try {
        out[c] = fn(c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) {
          error = std::current_exception();
        }
        next = n_chunks;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int i = 0; i < w; ++i) {
    pool.emplace_back(body);
  }
  for (auto& t : pool) {
    t.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
  return out;
}

// PRELOG_LAB_WORKERS, or 1 when unset or invalid.
inline int default_workers() {
  const char* env = std::getenv("PRELOG_LAB_WORKERS");
  if (env == nullptr) {
    return 1;
  }
  const int w = std::atoi(env);
  return w > 0 ? w : 1;
}

}  // namespace prelog
