#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace neurorate {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent sub-seed from a root seed and a path of stream ids,
/// e.g. derive_seed(seed, {repetition, participant}).
constexpr std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t s = mix64(root);
    for (auto p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
    return s;
}

/// FNV-1a; a stream id for string keys that does not depend on std::hash.
constexpr std::uint64_t stable_hash(std::string_view text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Uniform double in [0, 1) from the top 53 bits; independent of the
/// standard library's distribution implementations.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

using Rng = std::mt19937_64;

/// Fisher-Yates with rng() % i, so the order does not depend on the
/// standard library's std::shuffle.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

} // namespace neurorate
