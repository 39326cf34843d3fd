#pragma once

#include <functional>

namespace elberto {

// Worker cap: ELBERTO_THREADS when set (>= 1), else hardware concurrency.
int worker_count();

// Static-partition parallel map over [0, n); fn(i) must be independent per i.
// Runs serially when n is small or only one worker is available.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace elberto
