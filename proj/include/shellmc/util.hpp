#pragma once

#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

namespace shellmc {

// Chunked parallel loop. Chunk boundaries depend only on `chunk`, never on
// the worker count, so per-chunk results can be reduced in chunk order to
// give worker-count-independent output.
template <typename Fn>
void parallel_for_chunks(long long n, int workers, long long chunk, Fn&& fn) {
  if (n <= 0) return;
  const long long n_chunks = (n + chunk - 1) / chunk;
  if (workers <= 1 || n_chunks == 1) {
    for (long long c = 0; c < n_chunks; ++c) {
      const long long b = c * chunk;
      fn(b, std::min(n, b + chunk), c);
    }
    return;
  }
  std::atomic<long long> next{0};
  auto work = [&]() {
    for (;;) {
      const long long c = next.fetch_add(1);
      if (c >= n_chunks) return;
      const long long b = c * chunk;
      fn(b, std::min(n, b + chunk), c);
    }
  };
  std::vector<std::thread> pool;
  const int nt = static_cast<int>(std::min<long long>(workers, n_chunks));
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
}

}  // namespace shellmc
