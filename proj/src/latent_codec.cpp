#include "unisync/latent_codec.hpp"

#include <algorithm>

namespace unisync {

namespace {

void check_divisible(const Dims& d, const CodecSpec& spec) {
    if (spec.spatial_factor == 0 || spec.temporal_factor == 0) {
        fail(ErrorKind::InvalidDimension, "codec factors must be positive");
    }
    if (d.h % spec.spatial_factor != 0 || d.w % spec.spatial_factor != 0 || d.f % spec.temporal_factor != 0) {
        fail(ErrorKind::InvalidDimension, "dims " + d.str() + " not divisible by codec factors (" +
                                              std::to_string(spec.temporal_factor) + ", " +
                                              std::to_string(spec.spatial_factor) + ")");
    }
}

}  // namespace

Grid pool_latent(const Grid& px, const CodecSpec& spec) {
    const Dims& d = px.dims();
    check_divisible(d, spec);
    const std::size_t pf = spec.temporal_factor, ps = spec.spatial_factor;
    Dims ld{d.b, d.c, d.f / pf, d.h / ps, d.w / ps};
    Grid out(ld);
    const double inv = 1.0 / static_cast<double>(pf * ps * ps);
    for (std::size_t b = 0; b < ld.b; ++b) {
        for (std::size_t c = 0; c < ld.c; ++c) {
            for (std::size_t f = 0; f < ld.f; ++f) {
                for (std::size_t y = 0; y < ld.h; ++y) {
                    for (std::size_t x = 0; x < ld.w; ++x) {
                        double acc = 0.0;
                        for (std::size_t df = 0; df < pf; ++df) {
                            for (std::size_t dy = 0; dy < ps; ++dy) {
                                for (std::size_t dx = 0; dx < ps; ++dx) {
                                    acc += px.at(b, c, f * pf + df, y * ps + dy, x * ps + dx);
                                }
                            }
                        }
                        out.at(b, c, f, y, x) = static_cast<float>(acc * inv);
                    }
                }
            }
        }
    }
    return out;
}

Grid upsample_latent(const Grid& z, const CodecSpec& spec) {
    const Dims& d = z.dims();
    const std::size_t pf = spec.temporal_factor, ps = spec.spatial_factor;
    Grid out(Dims{d.b, d.c, d.f * pf, d.h * ps, d.w * ps});
    const Dims& od = out.dims();
    for (std::size_t b = 0; b < od.b; ++b) {
        for (std::size_t c = 0; c < od.c; ++c) {
            for (std::size_t f = 0; f < od.f; ++f) {
                for (std::size_t y = 0; y < od.h; ++y) {
                    for (std::size_t x = 0; x < od.w; ++x) {
                        out.at(b, c, f, y, x) = z.at(b, c, f / pf, y / ps, x / ps);
                    }
                }
            }
        }
    }
    return out;
}

Grid encode_frames(const FrameSequence& frames, const CodecSpec& spec) {
    return pool_latent(frames.to_grid(), spec);
}

FrameSequence decode_latent(const Grid& latent, const CodecSpec& spec) {
    require_finite(latent, "decode_latent input");
    FrameSequence fs = FrameSequence::from_grid(upsample_latent(latent, spec));
    fs.clamp01();
    return fs;
}

Grid concat_channels(const Grid& a, const Grid& b) {
    const Dims& da = a.dims();
    const Dims& db = b.dims();
    if (da.b != db.b || da.f != db.f || da.h != db.h || da.w != db.w) {
        fail(ErrorKind::InvalidDimension, "concat_channels: extents " + da.str() + " vs " + db.str());
    }
    Grid out(Dims{da.b, da.c + db.c, da.f, da.h, da.w});
    const std::size_t chan = da.per_channel();
    for (std::size_t n = 0; n < da.b; ++n) {
        auto dst = out.batch(n);
        auto sa = a.batch(n);
        auto sb = b.batch(n);
        std::copy(sa.begin(), sa.end(), dst.begin());
        std::copy(sb.begin(), sb.end(), dst.begin() + static_cast<std::ptrdiff_t>(da.c * chan));
    }
    return out;
}

Grid latent_mask_from_pixel_mask(const FrameSequence& mask, const CodecSpec& spec) {
    if (mask.channels() != 1) {
        fail(ErrorKind::InvalidInput, "pixel mask must be single-channel");
    }
    for (float v : mask.data()) {
        if (v != 0.0f && v != 1.0f) {
            fail(ErrorKind::InvalidInput, "pixel mask is not binary");
        }
    }
    Dims d{1, 1, mask.frames(), mask.height(), mask.width()};
    check_divisible(d, spec);
    const std::size_t pf = spec.temporal_factor, ps = spec.spatial_factor;
    Grid out(Dims{1, 1, d.f / pf, d.h / ps, d.w / ps});
    for (std::size_t f = 0; f < d.f; ++f) {
        for (std::size_t y = 0; y < d.h; ++y) {
            for (std::size_t x = 0; x < d.w; ++x) {
                if (mask.at(f, y, x, 0) != 0.0f) {
                    out.at(0, 0, f / pf, y / ps, x / ps) = 1.0f;
                }
            }
        }
    }
    return out;
}

}  // namespace unisync
