#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace simpipe {

/// SplitMix64 finalizer; used for seed derivation and counter-based hashing.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent random streams used across the pipeline. A stream is a
/// function of (seed, key, tag) only, so per-user output never depends on
/// the order in which users are processed.
enum class stream_tag : std::uint64_t {
    population = 0x706f70,
    household = 0x686f75,
    plan = 0x706c61,
    public_event = 0x657674,
    app_assignment = 0x617070,
    destination = 0x647374,
    packets = 0x706b74,
    corruption = 0x636f72,
};

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key, stream_tag tag) noexcept
{
    return splitmix64(splitmix64(seed ^ key) ^ static_cast<std::uint64_t>(tag));
}

/// Maps a 64-bit hash to [0, 1) with 53 bits of resolution.
constexpr double unit_interval(std::uint64_t h) noexcept
{
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Counter-based uniform draw in [0, 1): stateless, so it can be evaluated
/// for any (seed, a, b, c) in any order.
constexpr double hash_uniform(std::uint64_t seed, stream_tag tag, std::uint64_t a,
                              std::uint64_t b = 0, std::uint64_t c = 0) noexcept
{
    std::uint64_t h = derive_seed(seed, a, tag);
    h = splitmix64(h ^ b);
    h = splitmix64(h ^ (c * 0x9e3779b97f4a7c15ULL));
    return unit_interval(h);
}

using rng_engine = std::mt19937_64;

inline rng_engine make_engine(std::uint64_t seed, std::uint64_t key, stream_tag tag)
{
    return rng_engine{derive_seed(seed, key, tag)};
}

/// Uniform draw in [0, 1) from an engine, identical on every standard library.
inline double uniform01(rng_engine& eng)
{
    return unit_interval(eng());
}

// The standard <random> distributions are implementation-defined, which
// would make datasets differ between standard libraries. The samplers
// below are written against uniform01 so output is portable.

inline double sample_exponential(rng_engine& eng, double mean)
{
    return -mean * std::log1p(-uniform01(eng));
}

inline double sample_normal(rng_engine& eng, double mean, double stddev)
{
    double u1 = uniform01(eng);
    double u2 = uniform01(eng);
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

/// Poisson by sequential inversion. Large means are split into chunks of at
/// most 32; a sum of independent Poisson variables is Poisson.
inline std::uint64_t sample_poisson(rng_engine& eng, double mean)
{
    std::uint64_t total = 0;
    while (mean > 0.0) {
        double chunk = mean > 32.0 ? 32.0 : mean;
        mean -= chunk;
        double u = uniform01(eng);
        double p = std::exp(-chunk);
        double cdf = p;
        std::uint64_t k = 0;
        while (u >= cdf && p > 0.0) {
            ++k;
            p *= chunk / static_cast<double>(k);
            cdf += p;
        }
        total += k;
    }
    return total;
}

} // namespace simpipe
