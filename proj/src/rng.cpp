#include "mixvol/rng.hpp"

#include <cmath>
#include <numbers>

namespace mixvol {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

// 53 random bits mapped to the open unit interval.
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

} // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, c[0], hi0, lo0);
        mulhilo(kMul1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kWeyl0;
        k[1] += kWeyl1;
    }
    return c;
}

std::array<std::uint32_t, 4> PathRng::block(Stream stream, std::uint32_t block_index) const {
    const std::array<std::uint32_t, 4> counter{
        block_index, static_cast<std::uint32_t>(stream),
        static_cast<std::uint32_t>(path_), static_cast<std::uint32_t>(path_ >> 32)};
    const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed_),
                                           static_cast<std::uint32_t>(seed_ >> 32)};
    return philox4x32(counter, key);
}

double PathRng::uniform(Stream stream, std::uint32_t index) const {
    const auto b = block(stream, index / 2);
    return (index % 2 == 0) ? to_unit(b[0], b[1]) : to_unit(b[2], b[3]);
}

double PathRng::normal(Stream stream, std::uint32_t index) const {
    const auto b = block(stream, index / 2);
    const double u1 = to_unit(b[0], b[1]);
    const double u2 = to_unit(b[2], b[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return (index % 2 == 0) ? radius * std::cos(angle) : radius * std::sin(angle);
}

} // namespace mixvol
