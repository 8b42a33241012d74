#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace tmm {

// Seed splitting: every random stream in the library is derived from one
// master seed by hashing the stream's integer path, e.g.
//   derive_seed(master, {stream::forward, step, block}).
// Each path component is folded in with one splitmix64 round, so streams for
// different paths are decorrelated and a given path always yields the same seed
// regardless of worker count.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

using Rng = std::mt19937_64;

// Uniform on [0, 1) from the top 53 bits; identical across standard libraries,
// unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Stream tags for derive_seed.
namespace stream {
inline constexpr std::uint64_t restart = 1;
inline constexpr std::uint64_t monte_carlo = 2;
inline constexpr std::uint64_t jitter = 3;
inline constexpr std::uint64_t baseline = 4;
inline constexpr std::uint64_t forward = 5;
inline constexpr std::uint64_t paths = 6;
inline constexpr std::uint64_t subsample = 7;
}  // namespace stream

}  // namespace tmm
