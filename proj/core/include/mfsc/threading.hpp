#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mfsc {

// Fixed-size block size for path scheduling. Blocks are the unit of
// accumulation, so reductions merge the same partials in the same order
// for any worker count.
inline constexpr int kPathBlock = 64;

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

inline int block_count(int total) {
  return (total + kPathBlock - 1) / kPathBlock;
}

// Runs fn(block_index, begin, end) over fixed path blocks. Workers pull
// blocks from an atomic counter; results must go into block- or
// path-indexed slots so the schedule cannot affect the output.
inline void parallel_blocks(int total, int threads,
                            const std::function<void(int, int, int)>& fn) {
  const int blocks = block_count(total);
  threads = std::min(resolve_threads(threads), blocks);
  if (threads <= 1) {
    for (int b = 0; b < blocks; ++b) {
      fn(b, b * kPathBlock, std::min(total, (b + 1) * kPathBlock));
    }
    return;
  }

  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    try {
      for (int b = next.fetch_add(1); b < blocks; b = next.fetch_add(1)) {
        fn(b, b * kPathBlock, std::min(total, (b + 1) * kPathBlock));
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace mfsc
