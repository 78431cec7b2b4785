#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace quadlasso {

using Rng = std::mt19937_64;

/// Independent stream seed for (master, index), by splitmix64 finalization.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Fisher-Yates permutation of 0..n-1.
inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

}  // namespace quadlasso
