#include "photoloss/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace photoloss {

namespace {

// Work below this many rows is not worth fanning out.
constexpr int kSerialRowLimit = 256;

int detect_threads() {
  if (const char* env = std::getenv("PHOTOLOSS_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
    return 1;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return int(std::clamp(hw, 1u, 8u));
}

}  // namespace

int thread_count() {
  static const int n = detect_threads();
  return n;
}

void parallel_for(int rows, const std::function<void(int, int)>& fn) {
  const int workers = std::min(thread_count(), rows);
  if (workers <= 1 || rows < kSerialRowLimit) {
    fn(0, rows);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(size_t(workers));
  const int chunk = (rows + workers - 1) / workers;
  for (int i = 0; i < workers; ++i) {
    const int lo = i * chunk;
    const int hi = std::min(lo + chunk, rows);
    if (lo >= hi) break;
    pool.emplace_back(fn, lo, hi);
  }
  for (auto& t : pool) t.join();
}

}  // namespace photoloss
