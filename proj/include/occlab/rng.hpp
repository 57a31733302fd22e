#pragma once

#include <array>
#include <cstdint>

namespace occlab {

/// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Purpose tags separating independent random streams under one seed.
enum class Stream : std::uint32_t
{
    transition = 0,
    gaussian = 1,
    sampling = 2,
    bootstrap = 3,
    rademacher = 4,
    auxiliary = 5,
};

/// Counter-based generator: every draw is a pure function of
/// (seed, replicate, stream, time, node), so results never depend on the
/// order in which draws are made or on how work is split across threads.
class CounterRng
{
public:
    CounterRng(std::uint64_t seed, std::uint64_t replicate, Stream stream = Stream::transition);

    /// Uniform on the open interval (0,1).
    double uniform(std::uint64_t t, std::uint64_t node) const;

    /// Standard normal (Box-Muller on two independent uniforms of the same block).
    double normal(std::uint64_t t, std::uint64_t node) const;

    /// Raw 64 bits.
    std::uint64_t bits(std::uint64_t t, std::uint64_t node) const;

    std::uint64_t seed() const { return seed_; }
    std::uint64_t replicate() const { return replicate_; }

private:
    std::array<std::uint32_t, 4> block(std::uint64_t t, std::uint64_t node) const;

    std::uint64_t seed_;
    std::uint64_t replicate_;
    Stream stream_;
};

} // namespace occlab
