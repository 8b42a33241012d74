#include <atomic>
#include <cmath>
#include <limits>

#include "tmm/parallel.hpp"
#include "tmm/random.hpp"
#include "tmm/types.hpp"

namespace tmm {

namespace {
std::atomic<int> g_workers{1};
}

int worker_count() { return g_workers.load(); }

void set_worker_count(int n) { g_workers.store(std::max(1, n)); }

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = splitmix64(master);
    for (auto p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    return h;
}

double min_pairwise_distance(const Points& p) {
    double best = std::numeric_limits<double>::infinity();
    const Eigen::Index n = p.rows();
    const Eigen::Index d = p.cols();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double dist = 0.0;
            for (Eigen::Index k = 0; k < d; ++k)
                dist = std::max(dist, std::abs(p(i, k) - p(j, k)));
            best = std::min(best, dist);
        }
    }
    return best;
}

}  // namespace tmm
