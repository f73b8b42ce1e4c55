#pragma once

#include <cstdint>
#include <random>

namespace dacglm {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Child seed for stream `index` of a named purpose; independent of scheduling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index) {
    return splitmix64(splitmix64(seed ^ splitmix64(purpose)) + index);
}

namespace seed_stream {
inline constexpr std::uint64_t batch = 1;
inline constexpr std::uint64_t partition = 2;
inline constexpr std::uint64_t cv_folds = 3;
inline constexpr std::uint64_t replicate = 4;
inline constexpr std::uint64_t design = 5;
inline constexpr std::uint64_t coefficients = 6;
inline constexpr std::uint64_t response = 7;
}  // namespace seed_stream

}  // namespace dacglm
