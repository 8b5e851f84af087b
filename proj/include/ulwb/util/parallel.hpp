#pragma once
// Slot-indexed work distribution. Callers write results into per-index
// slots and fold them in index order afterwards, so the outcome is
// bit-identical for any thread count.

#include <atomic>
#include <thread>
#include <vector>

namespace ulwb {

/// Worker count: ULWB_THREADS env override, else hardware (capped at 8).
int default_threads();

template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
    if (threads <= 0) threads = default_threads();
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace ulwb
