#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace celluda {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed of a named, indexed substream of a root seed. Every stochastic stage
/// draws from its own substream so that partial reruns reproduce full runs.
inline std::uint64_t substream_seed(std::uint64_t root, std::string_view name, std::uint64_t index = 0)
{
    return splitmix64(splitmix64(root ^ fnv1a(name)) + splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t root, std::string_view name, std::uint64_t index = 0)
{
    return Rng(substream_seed(root, name, index));
}

/// Uniform double in [0, 1) with a fixed bit recipe (independent of the
/// standard library's distribution implementation).
inline double uniform01(Rng& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). Slight modulo bias is irrelevant at our sizes.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n)
{
    return rng() % n;
}

/// Standard normal draw (Box-Muller, one value per call).
inline double standard_normal(Rng& rng)
{
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

} // namespace celluda
