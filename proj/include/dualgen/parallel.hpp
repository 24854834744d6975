#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace dualgen {

// Runs fn(i) for i in [0, n). Each index owns its output slot, so results
// are identical for any worker count; callers that reduce must do so in
// index order after the join.
template <typename Fn>
void parallel_for(size_t n, Fn&& fn, unsigned max_threads = 0) {
    if (n == 0) return;
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (max_threads != 0) hw = std::min(hw, max_threads);
    const unsigned workers = static_cast<unsigned>(std::min<size_t>(hw, n));
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace dualgen
