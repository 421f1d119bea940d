#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace manifold {

// Static block partition of [0, n) over the given number of threads. Each
// index is visited exactly once; results must be written to per-index slots
// so the outcome is independent of the thread count.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    if (threads <= 1 || n == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    threads = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int worker = 0; worker < threads; ++worker) {
        pool.emplace_back([&, worker] {
            for (int i = worker; i < n; i += threads) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace manifold
