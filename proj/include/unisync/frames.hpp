#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "unisync/grid.hpp"

namespace unisync {

/// F images of H x W x {1|3} interleaved channels, values in [0, 1].
class FrameSequence {
public:
    FrameSequence() = default;
    FrameSequence(std::size_t frames, std::size_t height, std::size_t width, std::size_t channels, float fill = 0.0f);

    std::size_t frames() const noexcept { return m_frames; }
    std::size_t height() const noexcept { return m_height; }
    std::size_t width() const noexcept { return m_width; }
    std::size_t channels() const noexcept { return m_channels; }
    std::size_t frame_size() const noexcept { return m_height * m_width * m_channels; }
    bool same_shape(const FrameSequence& o) const noexcept {
        return m_frames == o.m_frames && m_height == o.m_height && m_width == o.m_width && m_channels == o.m_channels;
    }

    float& at(std::size_t f, std::size_t y, std::size_t x, std::size_t c) noexcept {
        return m_data[((f * m_height + y) * m_width + x) * m_channels + c];
    }
    float at(std::size_t f, std::size_t y, std::size_t x, std::size_t c) const noexcept {
        return m_data[((f * m_height + y) * m_width + x) * m_channels + c];
    }

    std::span<float> frame(std::size_t f) noexcept { return {m_data.data() + f * frame_size(), frame_size()}; }
    std::span<const float> frame(std::size_t f) const noexcept {
        return {m_data.data() + f * frame_size(), frame_size()};
    }
    std::span<float> data() noexcept { return m_data; }
    std::span<const float> data() const noexcept { return m_data; }

    void clamp01() noexcept;
    /// Mean over channels at one pixel.
    float luminance(std::size_t f, std::size_t y, std::size_t x) const noexcept;

    /// Channel-planar (1, C, F, H, W) view as a Grid, and back.
    Grid to_grid() const;
    static FrameSequence from_grid(const Grid& g);

private:
    std::size_t m_frames = 0;
    std::size_t m_height = 0;
    std::size_t m_width = 0;
    std::size_t m_channels = 0;
    std::vector<float> m_data;
};

/// Assembles frames from per-frame buffers; mixed sizes are an InvalidInput error.
FrameSequence frames_from_images(std::span<const std::vector<float>> images, std::size_t height, std::size_t width,
                                 std::size_t channels);

struct NetpbmImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;  // 1 for P5, 3 for P6
    std::vector<std::uint8_t> pixels;
};

NetpbmImage read_netpbm(const std::filesystem::path& path);
void write_netpbm(const NetpbmImage& img, const std::filesystem::path& path);

/// Writes frame_%05d.pgm / .ppm into `dir` (created if needed). Values are clamped
/// to [0, 1] and quantized as round(v * 255).
void write_frames(const FrameSequence& frames, const std::filesystem::path& dir);
/// Reads every frame_%05d.{pgm,ppm} in `dir` in index order.
FrameSequence read_frames(const std::filesystem::path& dir);

}  // namespace unisync
