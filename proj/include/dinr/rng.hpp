#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dinr {

/// splitmix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a tuple of indices.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys)
{
    std::uint64_t h = splitmix64(base);
    for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
    return h;
}

using Stream = std::mt19937_64;

inline Stream make_stream(std::uint64_t base, std::initializer_list<std::uint64_t> keys)
{
    return Stream(derive_seed(base, keys));
}

// Stream tags used to carve sub-seeds out of one top-level seed.
namespace seed_tag {
inline constexpr std::uint64_t network_init = 1;
inline constexpr std::uint64_t noise = 2;
inline constexpr std::uint64_t permutation = 3;
inline constexpr std::uint64_t sampling = 4;
}  // namespace seed_tag

}  // namespace dinr
