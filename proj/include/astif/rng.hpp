#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace astif {

using Rng = std::mt19937_64;

/// Derives a named sub-seed from the master seed so components (lstm, forest,
/// meta, stub-noise) draw from independent, individually reproducible streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view name) {
    std::uint64_t h = 1469598103934665603ull; // FNV-1a
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    std::uint64_t z = master ^ h;
    z += 0x9e3779b97f4a7c15ull; // splitmix64 finalize
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace astif
