#pragma once

// Seeded randomness helpers. Sampling goes through explicit arithmetic on
// mt19937_64 output rather than <random> distributions: the standard leaves
// distribution algorithms implementation-defined, and pipeline outputs must
// be reproducible byte for byte.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace evomd {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Per-stream seed that does not depend on draw order of other streams.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
    return splitmix64(root ^ splitmix64(stream + 0x9e3779b97f4a7c15ULL));
}

// FNV-1a. Portable stand-in for std::hash (which is implementation-defined),
// used to derive per-stratum seed streams from string keys.
inline std::uint64_t string_hash64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// [0, 1) with 53-bit resolution.
inline double uniform_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Unbiased integer in [0, n).
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % n;
}

// Integer in [lo, hi], both inclusive.
inline std::int64_t uniform_between(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(uniform_below(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

// k distinct indices from [0, n), returned in ascending order.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                           std::mt19937_64& rng) {
    if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace evomd
