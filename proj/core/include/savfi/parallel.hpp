#pragma once

#include <functional>

namespace savfi {

// Runs fn(i) for i in [begin, end) on up to `threads` workers with static
// chunking. threads <= 1 executes inline. Callers must only write disjoint
// outputs per index; every per-index computation keeps its own accumulation
// order, so results do not depend on the schedule.
void parallel_for(int begin, int end, int threads,
                  const std::function<void(int)>& fn);

}  // namespace savfi
