#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace warmsim {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

/// 128-bit substream key derived from (master seed, replication index).
struct SubstreamKey
{
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;
};

constexpr SubstreamKey substream_key(std::uint64_t master_seed, std::uint64_t index) noexcept
{
    const std::uint64_t a = detail::splitmix64(master_seed ^ 0x243f6a8885a308d3ULL);
    const std::uint64_t b = detail::splitmix64(index + 0x13198a2e03707344ULL);
    const std::uint64_t hi = detail::splitmix64(a ^ detail::splitmix64(b));
    const std::uint64_t lo = detail::splitmix64(hi ^ b ^ 0xa4093822299f31d0ULL);
    return {hi, lo};
}

/**
 * A single random stream. Uniforms are built from the top 53 bits of a
 * mt19937_64 draw, so every platform produces the same doubles for the
 * same seed (std::uniform_real_distribution gives no such guarantee).
 */
class RandomStream
{
  public:
    explicit RandomStream(std::uint64_t seed = 0x5eedULL) : engine_(seed) {}

    explicit RandomStream(SubstreamKey key)
    {
        std::seed_seq seq{static_cast<std::uint32_t>(key.hi >> 32), static_cast<std::uint32_t>(key.hi),
                          static_cast<std::uint32_t>(key.lo >> 32), static_cast<std::uint32_t>(key.lo)};
        engine_.seed(seq);
    }

    static RandomStream substream(std::uint64_t master_seed, std::uint64_t index)
    {
        return RandomStream(substream_key(master_seed, index));
    }

    /// Uniform on [0, 1).
    double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard exponential mark, always finite and >= 0.
    double exponential() noexcept { return -std::log1p(-uniform()); }

    std::uint64_t next_u64() noexcept { return engine_(); }

  private:
    std::mt19937_64 engine_;
};

} // namespace warmsim
