#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace recpoison {

using Rng = std::mt19937_64;

// splitmix64 finalizer, used to derive independent streams from one seed.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Rng seeded from a base seed and a list of stream tags (epoch, purpose, ...).
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {}) {
    std::uint64_t h = mix64(seed);
    for (std::uint64_t t : tags) h = mix64(h ^ mix64(t + 0x51ed270b27a4f1c3ULL));
    return Rng(h);
}

}  // namespace recpoison
