#pragma once

// Reproducible random streams.
//
// Every simulated quantity draws from a stream identified by
// (master_seed, replicate_index, arc_index). The stream seed is a pure
// function of that triple (derive_stream), and the generator is
// xoshiro256** seeded through splitmix64. Variates are produced by fixed
// recipes (inverse-CDF exponentials, 53-bit uniforms, Box-Muller normals
// using the cosine branch only), so a stream's output is the same on every
// platform and every thread schedule.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace dvcover {

inline constexpr const char* kRngRecipe =
    "xoshiro256**/splitmix64-seeded; stream=mix(master,replicate,arc); "
    "uniform=53-bit; exponential=-log1p(-u)/rate; normal=box-muller-cos";

inline constexpr std::uint64_t splitmix64_step(std::uint64_t& state) noexcept
{
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stream seed for one (master, replicate, arc) triple.
///
/// Each coordinate is folded in with a distinct odd multiplier followed by
/// a full splitmix64 finalizer, so neighbouring indices land far apart.
inline constexpr std::uint64_t derive_stream(std::uint64_t master_seed, std::uint64_t replicate_index,
                                             std::uint64_t arc_index) noexcept
{
    std::uint64_t h = mix64(master_seed + 0x9e3779b97f4a7c15ULL);
    h = mix64(h ^ (replicate_index * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
    h = mix64(h ^ (arc_index * 0xaef17502108ef2d9ULL + 0x6a09e667f3bcc909ULL));
    return h;
}

class Xoshiro256
{
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed) noexcept
    {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64_step(sm);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept
    {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    friend bool operator==(const Xoshiro256&, const Xoshiro256&) = default;

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4]{};
};

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Xoshiro256& g) noexcept
{
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

/// Exponential with the given rate, by inversion.
inline double exponential(Xoshiro256& g, double rate) noexcept
{
    return -std::log1p(-uniform01(g)) / rate;
}

/// Standard normal: one Box-Muller draw per two uniforms (cosine branch).
inline double standard_normal(Xoshiro256& g) noexcept
{
    const double u1 = 1.0 - uniform01(g); // (0, 1]
    const double u2 = uniform01(g);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline Xoshiro256 make_stream(std::uint64_t master_seed, std::uint64_t replicate_index, std::uint64_t arc_index)
{
    return Xoshiro256(derive_stream(master_seed, replicate_index, arc_index));
}

} // namespace dvcover
