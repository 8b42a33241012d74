#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace tmm {

// Process-wide worker count used by the pair-sum loops. 1 means run inline.
int worker_count();
void set_worker_count(int n);

// Runs fn(begin, end) over a static partition of [0, n). Callers write into
// per-index slots and reduce sequentially afterwards, so results do not
// depend on the number of workers.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(std::max(1, worker_count())), n);
    if (workers <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t b = w * chunk;
        const std::size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace tmm
