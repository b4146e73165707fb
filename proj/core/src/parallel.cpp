#include "savfi/parallel.hpp"

#include <algorithm>
#include <thread>
#include <vector>

namespace savfi {

void parallel_for(int begin, int end, int threads,
                  const std::function<void(int)>& fn) {
  const int n = end - begin;
  if (n <= 0) {
    return;
  }
  const int workers = std::max(1, std::min(threads, n));
  if (workers == 1) {
    for (int i = begin; i < end; ++i) {
      fn(i);
    }
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  const int chunk = (n + workers - 1) / workers;
  for (int w = 1; w < workers; ++w) {
    const int lo = begin + w * chunk;
    const int hi = std::min(end, lo + chunk);
    if (lo >= hi) {
      break;
    }
    pool.emplace_back([&fn, lo, hi] {
      for (int i = lo; i < hi; ++i) {
        fn(i);
      }
    });
  }
  const int hi0 = std::min(end, begin + chunk);
  for (int i = begin; i < hi0; ++i) {
    fn(i);
  }
  for (auto& t : pool) {
    t.join();
  }
}

}  // namespace savfi
