#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace flowconn::par {

/// Worker count, capped by the FLOWCONN_THREADS environment variable.
/// Results never depend on it: work is split into fixed chunks and the
/// chunk accumulators are folded in a fixed pairwise order.
inline int worker_count() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  int n = static_cast<int>(hw);
  if (const char* env = std::getenv("FLOWCONN_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = cap;
  }
  return std::min(n, 256);
}

inline constexpr uint64_t kDefaultChunk = 1024;

/// Deterministic chunked map-reduce over unit indices [0, count).
/// per_unit(acc, u) accumulates into a chunk-local accumulator (sequential
/// within a chunk); combine(a, b) folds two accumulators.
template <class Acc, class PerUnit, class Combine>
Acc chunked_reduce(uint64_t count, uint64_t chunk_size, Acc init,
                   PerUnit per_unit, Combine combine) {
  if (count == 0) return init;
  const uint64_t n_chunks = (count + chunk_size - 1) / chunk_size;
  std::vector<Acc> slots(n_chunks, init);

  std::atomic<uint64_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};

  auto work = [&]() {
    for (;;) {
      const uint64_t c = next.fetch_add(1);
      if (c >= n_chunks || failed.load()) return;
      const uint64_t lo = c * chunk_size;
      const uint64_t hi = std::min(count, lo + chunk_size);
      try {
        for (uint64_t u = lo; u < hi; ++u) per_unit(slots[c], u);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
        return;
      }
    }
  };

  const int workers = static_cast<int>(
      std::min<uint64_t>(static_cast<uint64_t>(worker_count()), n_chunks));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failed.load()) std::rethrow_exception(failure);

  // Fixed pairwise fold, independent of how chunks were scheduled.
  std::vector<Acc> level = std::move(slots);
  while (level.size() > 1) {
    std::vector<Acc> up;
    up.reserve((level.size() + 1) / 2);
    for (size_t i = 0; i + 1 < level.size(); i += 2)
      up.push_back(combine(level[i], level[i + 1]));
    if (level.size() % 2 == 1) up.push_back(level.back());
    level = std::move(up);
  }
  return level.front();
}

}  // namespace flowconn::par
