#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "unisync/error.hpp"

namespace unisync {

/// Extents of a rank-5 grid: batch, channels, frames, height, width.
struct Dims {
    std::size_t b = 0;
    std::size_t c = 0;
    std::size_t f = 0;
    std::size_t h = 0;
    std::size_t w = 0;

    std::size_t count() const noexcept { return b * c * f * h * w; }
    std::size_t per_batch() const noexcept { return c * f * h * w; }
    std::size_t per_channel() const noexcept { return f * h * w; }
    std::size_t plane() const noexcept { return h * w; }
    bool any_zero() const noexcept { return b == 0 || c == 0 || f == 0 || h == 0 || w == 0; }

    std::array<std::size_t, 5> as_array() const noexcept { return {b, c, f, h, w}; }
    std::string str() const;

    friend bool operator==(const Dims&, const Dims&) = default;
};

/// Dense row-major f32 tensor, always rank 5. Lower-rank data uses singleton extents.
class Grid {
public:
    Grid() = default;
    explicit Grid(Dims dims, float fill = 0.0f);
    Grid(Dims dims, std::vector<float> data);

    const Dims& dims() const noexcept { return m_dims; }
    std::size_t size() const noexcept { return m_data.size(); }
    bool empty() const noexcept { return m_data.empty(); }

    std::span<float> data() noexcept { return m_data; }
    std::span<const float> data() const noexcept { return m_data; }
    const std::vector<float>& values() const noexcept { return m_data; }

    std::size_t index(std::size_t b, std::size_t c, std::size_t f, std::size_t y, std::size_t x) const noexcept {
        return (((b * m_dims.c + c) * m_dims.f + f) * m_dims.h + y) * m_dims.w + x;
    }
    float& at(std::size_t b, std::size_t c, std::size_t f, std::size_t y, std::size_t x) noexcept {
        return m_data[index(b, c, f, y, x)];
    }
    float at(std::size_t b, std::size_t c, std::size_t f, std::size_t y, std::size_t x) const noexcept {
        return m_data[index(b, c, f, y, x)];
    }
    float& operator[](std::size_t i) noexcept { return m_data[i]; }
    float operator[](std::size_t i) const noexcept { return m_data[i]; }

    /// Contiguous view of one batch entry.
    std::span<float> batch(std::size_t b) noexcept { return {m_data.data() + b * m_dims.per_batch(), m_dims.per_batch()}; }
    std::span<const float> batch(std::size_t b) const noexcept {
        return {m_data.data() + b * m_dims.per_batch(), m_dims.per_batch()};
    }

    /// Copy of batch entry `b` as a B=1 grid.
    Grid slice_batch(std::size_t b) const;
    /// Copy of channels [begin, end).
    Grid slice_channels(std::size_t begin, std::size_t end) const;

    bool all_finite() const noexcept;
    bool bitwise_equal(const Grid& other) const noexcept;

    friend bool operator==(const Grid& a, const Grid& b) { return a.bitwise_equal(b); }

private:
    Dims m_dims;
    std::vector<float> m_data;
};

/// Throws InvalidInput if any value is NaN or infinite.
void require_finite(const Grid& g, const char* what);
void require_same_dims(const Grid& a, const Grid& b, const char* what);

/// Stacks B=1 grids along the batch axis.
Grid stack_batch(std::span<const Grid> items);

double max_abs_diff(const Grid& a, const Grid& b);

/// Binary grid file: "GRD1", u32 rank=5, five u32 extents, then f32 values, all little-endian.
void save_grid(const Grid& g, const std::filesystem::path& path);
Grid load_grid(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_grid(const Grid& g);
Grid decode_grid(std::span<const std::uint8_t> bytes);

}  // namespace unisync
