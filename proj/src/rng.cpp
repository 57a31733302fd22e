#include "occlab/rng.hpp"

#include <cmath>
#include <numbers>

namespace occlab {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t &hi, std::uint32_t &lo)
{
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline double to_open_unit(std::uint32_t w0, std::uint32_t w1)
{
    const std::uint64_t k = ((static_cast<std::uint64_t>(w0) << 32) | w1) >> 11;
    return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

} // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key)
{
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t replicate, Stream stream)
    : seed_(seed), replicate_(replicate), stream_(stream)
{
}

std::array<std::uint32_t, 4> CounterRng::block(std::uint64_t t, std::uint64_t node) const
{
    // Counter words: node, time, replicate (48 bits), stream tag (8 bits).
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(node),
        static_cast<std::uint32_t>(t),
        static_cast<std::uint32_t>(replicate_),
        static_cast<std::uint32_t>((replicate_ >> 32) & 0xFFFFFFu) |
            (static_cast<std::uint32_t>(stream_) << 24)};
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                              static_cast<std::uint32_t>(seed_ >> 32)};
    return philox4x32(ctr, key);
}

double CounterRng::uniform(std::uint64_t t, std::uint64_t node) const
{
    const auto b = block(t, node);
    return to_open_unit(b[0], b[1]);
}

double CounterRng::normal(std::uint64_t t, std::uint64_t node) const
{
    const auto b = block(t, node);
    const double u1 = to_open_unit(b[0], b[1]);
    const double u2 = to_open_unit(b[2], b[3]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t CounterRng::bits(std::uint64_t t, std::uint64_t node) const
{
    const auto b = block(t, node);
    return (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
}

} // namespace occlab
