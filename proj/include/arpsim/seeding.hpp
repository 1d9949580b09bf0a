#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace arpsim {

/// SplitMix64 finalizer (Steele, Lea & Flood). Bijective on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of trajectory (member, noise) under a master seed:
///   seed = splitmix64(splitmix64(splitmix64(master) ^ member) ^ noise_index)
/// Each level is a counter fed through the mixer, so streams never depend on
/// scheduling order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t member,
                                    std::uint64_t noise_index) noexcept {
    return splitmix64(splitmix64(splitmix64(master) ^ member) ^ noise_index);
}

using Engine = std::mt19937_64;

// Portable draws: the standard distributions are implementation-defined, so
// results would differ between standard libraries.

/// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Engine& eng) noexcept {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& eng, double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform01(eng);
}

/// Exponential with the given mean.
inline double exponential(Engine& eng, double mean) noexcept {
    return -mean * std::log1p(-uniform01(eng));
}

/// Standard normal via Box-Muller (one value per call).
inline double standard_normal(Engine& eng) noexcept {
    double u1 = uniform01(eng);
    while (u1 <= 0.0) u1 = uniform01(eng);
    const double u2 = uniform01(eng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace arpsim
