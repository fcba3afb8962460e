#include "unisync/pixel_composite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "unisync/error.hpp"
#include "unisync/simd/kernels.hpp"

namespace unisync {

void CompositeSpec::validate() const {
    if (dilate_radius < 0) {
        fail(ErrorKind::Config, "composite.dilate_radius must be >= 0 (got " + std::to_string(dilate_radius) + ")");
    }
    if (!(blur_sigma > 0.0) || !std::isfinite(blur_sigma)) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "composite.blur_sigma must be positive (got %g)", blur_sigma);
        fail(ErrorKind::Config, buf);
    }
}

namespace {

void require_single_channel(const FrameSequence& m, const char* what) {
    require(m.channels() == 1, ErrorKind::InvalidDimension, std::string(what) + ": mask must have one channel");
}

bool inside(const Point2& p, std::size_t height, std::size_t width) {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= static_cast<double>(width - 1) &&
           p.y <= static_cast<double>(height - 1);
}

long round_px(double v) { return static_cast<long>(std::floor(v + 0.5)); }

}  // namespace

RawMask mask_from_pose(const PoseTrack& track, std::size_t height, std::size_t width) {
    require(height > 0 && width > 0, ErrorKind::InvalidDimension, "mask_from_pose: empty frame size");
    RawMask out{FrameSequence(track.size(), height, width, 1), false};
    const long hmax = static_cast<long>(height) - 1, wmax = static_cast<long>(width) - 1;
    for (std::size_t f = 0; f < track.size(); ++f) {
        const PoseFrame& p = track.frames[f];
        if (!inside(p.mouth_left, height, width) || !inside(p.mouth_right, height, width)) {
            out.clipped = true;
        }
        const double x0 = std::min(p.mouth_left.x, p.mouth_right.x), x1 = std::max(p.mouth_left.x, p.mouth_right.x);
        const double y0 = std::min(p.mouth_left.y, p.mouth_right.y), y1 = std::max(p.mouth_left.y, p.mouth_right.y);
        const double margin = 0.2 * std::max(x1 - x0, y1 - y0);
        const long xa = std::max(0L, round_px(x0 - margin)), xb = std::min(wmax, round_px(x1 + margin));
        const long ya = std::max(0L, round_px(y0 - margin)), yb = std::min(hmax, round_px(y1 + margin));
        for (long y = ya; y <= yb; ++y)
            for (long x = xa; x <= xb; ++x) {
                out.mask.at(f, static_cast<std::size_t>(y), static_cast<std::size_t>(x), 0) = 1.0f;
            }
    }
    return out;
}

FrameSequence dilate(const FrameSequence& mask, int radius) {
    require_single_channel(mask, "dilate");
    require(radius >= 0, ErrorKind::InvalidInput, "dilate: radius must be >= 0");
    const std::size_t H = mask.height(), W = mask.width();
    const long r = radius;
    FrameSequence rows(mask.frames(), H, W, 1), out(mask.frames(), H, W, 1);
    // the square window separates into a row max then a column max
    for (std::size_t f = 0; f < mask.frames(); ++f) {
        for (std::size_t y = 0; y < H; ++y)
            for (long x = 0; x < static_cast<long>(W); ++x) {
                float m = 0.0f;
                for (long j = std::max(0L, x - r); j <= std::min(static_cast<long>(W) - 1, x + r); ++j) {
                    m = std::max(m, mask.at(f, y, static_cast<std::size_t>(j), 0));
                }
                rows.at(f, y, static_cast<std::size_t>(x), 0) = m;
            }
        for (long y = 0; y < static_cast<long>(H); ++y)
            for (std::size_t x = 0; x < W; ++x) {
                float m = 0.0f;
                for (long j = std::max(0L, y - r); j <= std::min(static_cast<long>(H) - 1, y + r); ++j) {
                    m = std::max(m, rows.at(f, static_cast<std::size_t>(j), x, 0));
                }
                out.at(f, static_cast<std::size_t>(y), x, 0) = m;
            }
    }
    return out;
}

std::vector<float> gaussian_kernel(double sigma) {
    require(sigma > 0.0 && std::isfinite(sigma), ErrorKind::InvalidInput, "gaussian_kernel: sigma must be positive");
    const auto r = static_cast<long>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
    double sum = 0.0;
    for (long i = -r; i <= r; ++i) {
        const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + r)] = v;
        sum += v;
    }
    std::vector<float> out(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) out[i] = static_cast<float>(k[i] / sum);
    return out;
}

FrameSequence gaussian_blur(const FrameSequence& mask, double sigma) {
    require_single_channel(mask, "gaussian_blur");
    const std::vector<float> k = gaussian_kernel(sigma);
    const std::size_t H = mask.height(), W = mask.width();
    FrameSequence out(mask.frames(), H, W, 1);
    std::vector<float> tmp(H * W);
    for (std::size_t f = 0; f < mask.frames(); ++f) {
        simd::convolve_rows(mask.frame(f), tmp, H, W, k);
        simd::convolve_cols(tmp, out.frame(f), H, W, k);
    }
    out.clamp01();
    return out;
}

FrameSequence soft_mask(const FrameSequence& raw, const CompositeSpec& spec) {
    spec.validate();
    return gaussian_blur(dilate(raw, spec.dilate_radius), spec.blur_sigma);
}

FrameSequence blend(const FrameSequence& x_gen, const FrameSequence& x_video, const FrameSequence& weight) {
    require(x_gen.same_shape(x_video), ErrorKind::InvalidDimension, "blend: generated and source frames differ in shape");
    require_single_channel(weight, "blend");
    require(weight.frames() == x_gen.frames() && weight.height() == x_gen.height() && weight.width() == x_gen.width(),
            ErrorKind::InvalidDimension, "blend: mask size differs from the frames");
    const std::size_t C = x_gen.channels();
    const std::size_t n = x_gen.frame_size();
    FrameSequence out(x_gen.frames(), x_gen.height(), x_gen.width(), C);
    std::vector<float> w(n);
    for (std::size_t f = 0; f < x_gen.frames(); ++f) {
        const auto m = weight.frame(f);
        for (std::size_t p = 0; p < m.size(); ++p)
            for (std::size_t c = 0; c < C; ++c) w[p * C + c] = m[p];
        simd::blend(out.frame(f), w, x_gen.frame(f), x_video.frame(f));
    }
    return out;
}

double boundary_grad(const FrameSequence& weight) {
    require_single_channel(weight, "boundary_grad");
    double g = 0.0;
    for (std::size_t f = 0; f < weight.frames(); ++f)
        for (std::size_t y = 0; y < weight.height(); ++y)
            for (std::size_t x = 0; x < weight.width(); ++x) {
                const double v = weight.at(f, y, x, 0);
                if (x + 1 < weight.width()) g = std::max(g, std::abs(weight.at(f, y, x + 1, 0) - v));
                if (y + 1 < weight.height()) g = std::max(g, std::abs(weight.at(f, y + 1, x, 0) - v));
            }
    return g;
}

double boundary_grad_bound(double sigma) { return 1.05 / (sigma * std::sqrt(2.0 * std::numbers::pi)); }

}  // namespace unisync
