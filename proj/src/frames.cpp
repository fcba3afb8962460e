#include "unisync/frames.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <string>

#include "byte_io.hpp"

namespace unisync {

FrameSequence::FrameSequence(std::size_t frames, std::size_t height, std::size_t width, std::size_t channels,
                             float fill)
    : m_frames(frames), m_height(height), m_width(width), m_channels(channels),
      m_data(frames * height * width * channels, fill) {
    require(channels == 1 || channels == 3, ErrorKind::InvalidInput, "frames must have 1 or 3 channels");
}

void FrameSequence::clamp01() noexcept {
    for (float& v : m_data) {
        v = std::isnan(v) ? 0.0f : std::clamp(v, 0.0f, 1.0f);
    }
}

float FrameSequence::luminance(std::size_t f, std::size_t y, std::size_t x) const noexcept {
    const float* p = m_data.data() + ((f * m_height + y) * m_width + x) * m_channels;
    if (m_channels == 1) {
        return p[0];
    }
    return (p[0] + p[1] + p[2]) / 3.0f;
}

Grid FrameSequence::to_grid() const {
    Grid g(Dims{1, m_channels, m_frames, m_height, m_width});
    for (std::size_t f = 0; f < m_frames; ++f) {
        for (std::size_t y = 0; y < m_height; ++y) {
            for (std::size_t x = 0; x < m_width; ++x) {
                for (std::size_t c = 0; c < m_channels; ++c) {
                    g.at(0, c, f, y, x) = at(f, y, x, c);
                }
            }
        }
    }
    return g;
}

FrameSequence FrameSequence::from_grid(const Grid& g) {
    const Dims& d = g.dims();
    require(d.b == 1, ErrorKind::InvalidDimension, "from_grid expects B=1, got " + d.str());
    FrameSequence fs(d.f, d.h, d.w, d.c);
    for (std::size_t f = 0; f < d.f; ++f) {
        for (std::size_t y = 0; y < d.h; ++y) {
            for (std::size_t x = 0; x < d.w; ++x) {
                for (std::size_t c = 0; c < d.c; ++c) {
                    fs.at(f, y, x, c) = g.at(0, c, f, y, x);
                }
            }
        }
    }
    return fs;
}

FrameSequence frames_from_images(std::span<const std::vector<float>> images, std::size_t height, std::size_t width,
                                 std::size_t channels) {
    FrameSequence fs(images.size(), height, width, channels);
    for (std::size_t f = 0; f < images.size(); ++f) {
        if (images[f].size() != fs.frame_size()) {
            fail(ErrorKind::InvalidInput, "frame " + std::to_string(f) + " has mismatched size");
        }
        std::copy(images[f].begin(), images[f].end(), fs.frame(f).begin());
    }
    return fs;
}

namespace {

// Header tokens are whitespace separated; '#' starts a comment running to end of line.
class HeaderParser {
public:
    explicit HeaderParser(std::span<const std::uint8_t> bytes) : m_bytes(bytes) {}

    std::size_t number(const char* what) {
        skip_space_and_comments();
        std::size_t v = 0;
        std::size_t digits = 0;
        while (m_pos < m_bytes.size() && std::isdigit(m_bytes[m_pos])) {
            v = v * 10 + (m_bytes[m_pos] - '0');
            ++m_pos;
            if (++digits > 9) {
                fail(ErrorKind::Format, std::string("netpbm value too large: ") + what);
            }
        }
        if (digits == 0) {
            fail(ErrorKind::Format, std::string("netpbm header missing ") + what);
        }
        return v;
    }
    // Exactly one whitespace byte separates maxval from the raster.
    void single_space() {
        if (m_pos >= m_bytes.size() || !std::isspace(m_bytes[m_pos])) {
            fail(ErrorKind::Format, "netpbm header not terminated by whitespace");
        }
        ++m_pos;
    }
    std::size_t pos() const noexcept { return m_pos; }
    void skip(std::size_t n) noexcept { m_pos += n; }

private:
    void skip_space_and_comments() {
        while (m_pos < m_bytes.size()) {
            if (std::isspace(m_bytes[m_pos])) {
                ++m_pos;
            } else if (m_bytes[m_pos] == '#') {
                while (m_pos < m_bytes.size() && m_bytes[m_pos] != '\n') {
                    ++m_pos;
                }
            } else {
                break;
            }
        }
    }

    std::span<const std::uint8_t> m_bytes;
    std::size_t m_pos = 0;
};

std::string frame_name(std::size_t i, std::size_t channels) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%05zu.%s", i, channels == 1 ? "pgm" : "ppm");
    return buf;
}

}  // namespace

NetpbmImage read_netpbm(const std::filesystem::path& path) {
    auto bytes = detail::read_file(path.string());
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        fail(ErrorKind::Format, "not a binary P5/P6 netpbm file: " + path.string());
    }
    NetpbmImage img;
    img.channels = bytes[1] == '5' ? 1 : 3;
    HeaderParser hp(bytes);
    hp.skip(2);
    img.width = hp.number("width");
    img.height = hp.number("height");
    const std::size_t maxval = hp.number("maxval");
    if (maxval != 255) {
        fail(ErrorKind::Format, "only maxval 255 is supported, got " + std::to_string(maxval));
    }
    hp.single_space();
    const std::size_t n = img.width * img.height * img.channels;
    if (bytes.size() - hp.pos() < n) {
        fail(ErrorKind::Format, "truncated netpbm raster: " + path.string());
    }
    img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(hp.pos()),
                      bytes.begin() + static_cast<std::ptrdiff_t>(hp.pos() + n));
    return img;
}

void write_netpbm(const NetpbmImage& img, const std::filesystem::path& path) {
    require(img.channels == 1 || img.channels == 3, ErrorKind::InvalidInput, "netpbm supports 1 or 3 channels");
    require(img.pixels.size() == img.width * img.height * img.channels, ErrorKind::InvalidInput,
            "netpbm pixel buffer size mismatch");
    std::string header = (img.channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width) + " " +
                         std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    detail::write_file(path.string(), out);
}

void write_frames(const FrameSequence& frames, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (std::size_t f = 0; f < frames.frames(); ++f) {
        NetpbmImage img{frames.width(), frames.height(), frames.channels(), {}};
        img.pixels.resize(frames.frame_size());
        auto src = frames.frame(f);
        for (std::size_t i = 0; i < src.size(); ++i) {
            const float v = std::isnan(src[i]) ? 0.0f : std::clamp(src[i], 0.0f, 1.0f);
            img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
        }
        write_netpbm(img, dir / frame_name(f, frames.channels()));
    }
}

FrameSequence read_frames(const std::filesystem::path& dir) {
    std::vector<std::vector<float>> images;
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
    for (std::size_t i = 0;; ++i) {
        std::filesystem::path p = dir / frame_name(i, 1);
        if (!std::filesystem::exists(p)) {
            p = dir / frame_name(i, 3);
            if (!std::filesystem::exists(p)) {
                break;
            }
        }
        NetpbmImage img = read_netpbm(p);
        if (i == 0) {
            width = img.width;
            height = img.height;
            channels = img.channels;
        } else if (img.width != width || img.height != height || img.channels != channels) {
            fail(ErrorKind::InvalidInput, "mixed frame sizes in " + dir.string());
        }
        std::vector<float> v(img.pixels.size());
        for (std::size_t k = 0; k < v.size(); ++k) {
            v[k] = static_cast<float>(img.pixels[k]) / 255.0f;
        }
        images.push_back(std::move(v));
    }
    if (images.empty()) {
        fail(ErrorKind::Io, "no frames found in " + dir.string());
    }
    return frames_from_images(images, height, width, channels);
}

}  // namespace unisync
