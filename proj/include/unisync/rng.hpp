#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "unisync/grid.hpp"

namespace unisync {

/// Philox4x32-10 block function. Pure; identical on every platform.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key) noexcept;

/// Counter-based random stream: every draw is philox(counter++, key(seed)).
/// Streams split by label get an unrelated key, so sub-streams never share blocks.
class RngStream {
public:
    RngStream() = default;
    explicit RngStream(std::uint64_t seed, std::uint64_t counter = 0) : m_seed(seed), m_counter(counter) {}

    std::uint64_t seed() const noexcept { return m_seed; }
    std::uint64_t counter() const noexcept { return m_counter; }

    RngStream split(std::string_view label) const noexcept;
    RngStream split(std::string_view label, std::uint64_t index) const noexcept;

    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    /// Standard normal via Box-Muller on one block (two 53-bit uniforms).
    double normal() noexcept;
    /// Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept;

private:
    std::array<std::uint32_t, 4> block() noexcept;

    std::uint64_t m_seed = 0;
    std::uint64_t m_counter = 0;
};

/// i.i.d. standard normal grid. Throws InvalidDimension for any zero extent.
Grid gaussian_noise(const Dims& dims, RngStream& rng);

}  // namespace unisync
