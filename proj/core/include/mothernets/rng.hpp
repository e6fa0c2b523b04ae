#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace mothernets {

// splitmix64; used to derive independent sub-seeds from one base seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return mix_seed(base ^ mix_seed(stream));
}

// FNV-1a, so member names can contribute to seed derivation deterministically.
inline std::uint64_t hash_name(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view name, std::uint64_t stream = 0) {
    return mix_seed(base ^ mix_seed(hash_name(name)) ^ mix_seed(stream + 0x51ed2701ULL));
}

using Rng = std::mt19937_64;

} // namespace mothernets
