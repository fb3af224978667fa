#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace shedbound {

/// Run f(i) for i in [lo, hi) on up to `jobs` threads. Work items must be
/// independent; callers own any per-index output slots, which keeps results
/// identical to a serial run regardless of scheduling.
inline void parallel_for(int lo, int hi, int jobs, const std::function<void(int)>& f) {
  if (hi <= lo) return;
  if (jobs <= 1 || hi - lo == 1) {
    for (int i = lo; i < hi; ++i) f(i);
    return;
  }
  std::atomic<int> next(lo);
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= hi) return;
      f(i);
    }
  };
  std::vector<std::thread> threads;
  const int nt = std::min(jobs, hi - lo);
  threads.reserve(nt);
  for (int t = 0; t < nt; ++t) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();
}

}  // namespace shedbound
