#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace hashtran {

using Rng = std::mt19937_64;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Position-based seed derivation: the same (seed, coordinates) always gives the
// same stream, independent of thread schedule or call order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) noexcept {
    std::uint64_t h = mix64(seed);
    for (auto c : coords) {
        h = mix64(h ^ mix64(c + 0x632be59bd9b4e019ULL));
    }
    return h;
}

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> coords = {}) {
    return Rng(derive_seed(seed, coords));
}

// Uniform integer in [0, bound) without relying on library distribution details.
inline std::uint64_t uniform_below(Rng &rng, std::uint64_t bound) {
    std::uniform_int_distribution<std::uint64_t> dist(0, bound - 1);
    return dist(rng);
}

inline double uniform01(Rng &rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// Floyd's algorithm: `count` distinct values from [0, population), returned ascending.
inline std::vector<std::size_t> sample_distinct(Rng &rng, std::size_t population, std::size_t count) {
    std::vector<std::size_t> chosen;
    if (count >= population) {
        chosen.resize(population);
        for (std::size_t i = 0; i < population; ++i) chosen[i] = i;
        return chosen;
    }
    chosen.reserve(count);
    std::vector<std::uint8_t> seen(population, 0);
    for (std::size_t j = population - count; j < population; ++j) {
        const std::size_t t = uniform_below(rng, j + 1);
        const std::size_t pick = seen[t] ? j : t;
        seen[pick] = 1;
        chosen.push_back(pick);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

template <class T>
void shuffle_in_place(std::vector<T> &v, Rng &rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = uniform_below(rng, i);
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace hashtran
