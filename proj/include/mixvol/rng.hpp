#pragma once

#include <array>
#include <cstdint>

namespace mixvol {

/// Philox4x32-10 counter-based generator. Every draw is a pure function of
/// (seed, path, stream, index), so a path's random numbers do not depend on
/// which worker generates it or in what order.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Substream identifiers. Hidden-state draws and Brownian increments never
/// share counters, so models that consume a different number of hidden
/// uniforms still see identical Brownian paths.
enum class Stream : std::uint32_t {
    hidden = 0,
    brownian = 1,
    auxiliary = 2,
};

class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t path) : seed_(seed), path_(path) {}

    /// Uniform on the open interval (0, 1).
    double uniform(Stream stream, std::uint32_t index) const;
    /// Standard normal via Box-Muller on a pair of uniforms.
    double normal(Stream stream, std::uint32_t index) const;

    std::uint64_t seed() const { return seed_; }
    std::uint64_t path() const { return path_; }

private:
    std::array<std::uint32_t, 4> block(Stream stream, std::uint32_t block_index) const;

    std::uint64_t seed_;
    std::uint64_t path_;
};

} // namespace mixvol
