#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace walkfeat {

// splitmix64 finalizer. Used to derive independent RNG streams from a master
// seed plus stream coordinates, so parallel walk generation stays reproducible
// no matter the thread count or iteration order.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t combine_seed(std::uint64_t a, std::uint64_t b) {
    return mix64(a ^ mix64(b));
}

inline std::uint64_t tag_seed(std::string_view tag) {
    // FNV-1a over the tag name.
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Stream derivation: derive_seed(master, "walks", epoch, model, walk).
template <typename... Ts>
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, Ts... parts) {
    std::uint64_t s = combine_seed(master, tag_seed(tag));
    ((s = combine_seed(s, static_cast<std::uint64_t>(parts))), ...);
    return s;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
    return std::mt19937_64{seed};
}

}  // namespace walkfeat
