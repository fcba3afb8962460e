#include "unisync/rng.hpp"

#include <cmath>
#include <numbers>

namespace unisync {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t splitmix(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) noexcept {
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

RngStream RngStream::split(std::string_view label) const noexcept {
    return RngStream(splitmix(m_seed ^ splitmix(fnv1a(label))), 0);
}

RngStream RngStream::split(std::string_view label, std::uint64_t index) const noexcept {
    return RngStream(splitmix(splitmix(m_seed ^ splitmix(fnv1a(label))) + index), 0);
}

std::array<std::uint32_t, 4> RngStream::block() noexcept {
    const std::uint64_t c = m_counter++;
    return philox4x32({static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32), 0u, 0u},
                      {static_cast<std::uint32_t>(m_seed), static_cast<std::uint32_t>(m_seed >> 32)});
}

std::uint64_t RngStream::next_u64() noexcept {
    auto b = block();
    return (static_cast<std::uint64_t>(b[1]) << 32) | b[0];
}

double RngStream::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() noexcept {
    auto b = block();
    const std::uint64_t a = ((static_cast<std::uint64_t>(b[1]) << 32) | b[0]) >> 11;
    const std::uint64_t c = ((static_cast<std::uint64_t>(b[3]) << 32) | b[2]) >> 11;
    // u1 in (0, 1] keeps the log finite.
    const double u1 = (static_cast<double>(a) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(c) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) noexcept {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) {
        return static_cast<std::int64_t>(next_u64());
    }
    return lo + static_cast<std::int64_t>(next_u64() % span);
}

Grid gaussian_noise(const Dims& dims, RngStream& rng) {
    require(!dims.any_zero(), ErrorKind::InvalidDimension, "gaussian_noise: zero extent in " + dims.str());
    Grid g(dims);
    for (float& v : g.data()) {
        v = static_cast<float>(rng.normal());
    }
    return g;
}

}  // namespace unisync
