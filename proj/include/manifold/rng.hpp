#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace manifold {

// All randomness in an experiment flows from one root seed; subsystems get
// independent streams keyed by a label so adding a consumer never perturbs
// the draws of another.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t seed_for(std::uint64_t root, std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(root ^ h);
}

inline std::mt19937_64 make_rng(std::uint64_t root, std::string_view tag) {
    return std::mt19937_64(seed_for(root, tag));
}

}  // namespace manifold
