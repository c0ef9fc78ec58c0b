#pragma once

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace pnlos {

/// Worker count: PNLOS_THREADS env var if set, else hardware concurrency.
inline int thread_count() {
    if (const char* env = std::getenv("PNLOS_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/**
 * Runs fn(i) for i in [0, n). Each index must write only its own output
 * slot so results are identical for any worker count.
 */
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
    const int workers = std::min(thread_count(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&, t]() {
            for (int i = t; i < n; i += workers) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace pnlos
