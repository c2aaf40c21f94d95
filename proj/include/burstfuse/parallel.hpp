#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace burstfuse {

inline int default_thread_count() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs fn(begin, end) over [0, count) split into contiguous chunks, one per
// worker. The partition depends only on (count, threads), never on
// scheduling, so any per-index output is identical across runs and across
// thread counts as long as indices write disjoint state.
inline void parallel_for_rows(int count, int threads, const std::function<void(int, int)>& fn) {
    threads = std::max(1, std::min(threads, count));
    if (threads <= 1 || count <= 1) {
        if (count > 0) fn(0, count);
        return;
    }
    const int chunk = (count + threads - 1) / threads;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        const int begin = t * chunk;
        const int end = std::min(count, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace burstfuse
