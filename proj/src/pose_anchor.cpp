#include "unisync/pose_anchor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "net_math.hpp"

namespace unisync {

namespace {

detail::PatchGeom geometry(const Grid& g, const ModelConfig& cfg, std::size_t channels, const char* what) {
    const Dims& d = g.dims();
    require(d.b == 1, ErrorKind::InvalidDimension, std::string(what) + " expects a single clip (B=1), got " + d.str());
    require(d.c == channels, ErrorKind::InvalidDimension,
            std::string(what) + " expects " + std::to_string(channels) + " channels, got " + d.str());
    if (d.f % cfg.patch_frames != 0 || d.h % cfg.patch_spatial != 0 || d.w % cfg.patch_spatial != 0 || d.any_zero()) {
        fail(ErrorKind::InvalidDimension, std::string(what) + ": extents " + d.str() + " not divisible by patch (" +
                                              std::to_string(cfg.patch_frames) + "," +
                                              std::to_string(cfg.patch_spatial) + "," +
                                              std::to_string(cfg.patch_spatial) + ")");
    }
    return {d.c, d.f, d.h, d.w, cfg.patch_frames, cfg.patch_spatial};
}

}  // namespace

Grid pose_conv3d(const Grid& z_pose, const ModelParams& params) {
    const ModelConfig& cfg = params.config();
    const auto geom = geometry(z_pose, cfg, cfg.channels, "pose_conv3d");
    const ParamLayout& L = params.layout();
    const auto x = detail::im2col<float>(z_pose.data().data(), geom);
    const auto y = detail::linear(x, params[L.conv_w].data.data(), geom.cols(), cfg.dim, params[L.conv_b].data.data());
    Grid out(Dims{1, cfg.dim, geom.gf(), geom.gh(), geom.gw()});
    const std::size_t s_count = geom.tokens();
    for (std::size_t s = 0; s < s_count; ++s) {
        for (std::size_t d = 0; d < cfg.dim; ++d) {
            out[d * s_count + s] = y.row(s)[d];
        }
    }
    return out;
}

TokenSeq pose_tokenize(const Grid& z1, const ModelParams& params) {
    const ModelConfig& cfg = params.config();
    const ParamLayout& L = params.layout();
    const Dims& d = z1.dims();
    require(d.b == 1 && d.c == cfg.dim, ErrorKind::InvalidDimension, "pose_tokenize expects (1, D, ...), got " + d.str());
    const std::size_t s_count = d.per_channel();
    require(s_count == cfg.tokens(), ErrorKind::InvalidDimension,
            "pose token count " + std::to_string(s_count) + " does not match positional embedding " +
                std::to_string(cfg.tokens()));
    detail::Mat<float> flat(s_count, cfg.dim);
    for (std::size_t s = 0; s < s_count; ++s) {
        for (std::size_t j = 0; j < cfg.dim; ++j) {
            flat.row(s)[j] = z1[j * s_count + s];
        }
    }
    auto proj = detail::linear(flat, params[L.proj_w].data.data(), cfg.dim, cfg.dim, params[L.proj_b].data.data());
    const float* pe = params[L.pos_embed].data.data();
    for (std::size_t i = 0; i < proj.v.size(); ++i) {
        proj.v[i] += pe[i];
    }
    auto normed = detail::layer_norm(proj, params[L.pose_gain].data.data(), params[L.pose_bias].data.data(),
                                     kLayerNormEps, static_cast<detail::NormCache<float>*>(nullptr));
    TokenSeq out(s_count, cfg.dim);
    out.data = std::move(normed.v);
    require(std::all_of(out.data.begin(), out.data.end(), [](float v) { return std::isfinite(v); }),
            ErrorKind::InvalidInput, "pose tokens are not finite");
    return out;
}

TokenSeq patch_embed(const Grid& z_concat, const ModelParams& params) {
    const ModelConfig& cfg = params.config();
    const ParamLayout& L = params.layout();
    const auto geom = geometry(z_concat, cfg, 2 * cfg.channels, "patch_embed");
    const auto x = detail::im2col<float>(z_concat.data().data(), geom);
    auto y = detail::linear(x, params[L.embed_w].data.data(), geom.cols(), cfg.dim, params[L.embed_b].data.data());
    TokenSeq out(geom.tokens(), cfg.dim);
    out.data = std::move(y.v);
    return out;
}

TokenSeq fuse_additive(const TokenSeq& pose, const TokenSeq& video) {
    if (pose.s != video.s || pose.d != video.d) {
        fail(ErrorKind::InvalidDimension, "fuse_additive shape mismatch: " + std::to_string(pose.s) + "x" +
                                              std::to_string(pose.d) + " vs " + std::to_string(video.s) + "x" +
                                              std::to_string(video.d));
    }
    TokenSeq out(pose.s, pose.d);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = pose.data[i] + video.data[i];
    }
    return out;
}

std::vector<float> audio_features(double value, std::size_t width) {
    require(width % 2 == 0 && width > 0, ErrorKind::InvalidDimension, "audio feature width must be even");
    const std::size_t half = width / 2;
    std::vector<float> out(width);
    for (std::size_t k = 0; k < half; ++k) {
        const double a = std::numbers::pi * static_cast<double>(k + 1) * value;
        out[k] = static_cast<float>(std::sin(a));
        out[half + k] = static_cast<float>(std::cos(a));
    }
    return out;
}

TokenSeq embed_audio(std::span<const float> signal, std::size_t slots, std::size_t width) {
    if (slots == 0 || signal.empty() || signal.size() % slots != 0) {
        fail(ErrorKind::InvalidInput, "audio length " + std::to_string(signal.size()) +
                                          " does not group into " + std::to_string(slots) + " temporal slots");
    }
    const std::size_t group = signal.size() / slots;
    TokenSeq out(slots, width);
    for (std::size_t i = 0; i < slots; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < group; ++j) {
            sum += static_cast<double>(signal[i * group + j]);
        }
        const auto feat = audio_features(sum / static_cast<double>(group), width);
        std::copy(feat.begin(), feat.end(), out.row(i));
    }
    return out;
}

}  // namespace unisync
