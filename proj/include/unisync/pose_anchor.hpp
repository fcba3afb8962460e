#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "unisync/grid.hpp"
#include "unisync/model_params.hpp"

namespace unisync {

/// S tokens of width D, row-major.
struct TokenSeq {
    std::size_t s = 0;
    std::size_t d = 0;
    std::vector<float> data;

    TokenSeq() = default;
    TokenSeq(std::size_t tokens, std::size_t width, float fill = 0.0f) : s(tokens), d(width), data(tokens * width, fill) {}

    float* row(std::size_t i) noexcept { return data.data() + i * d; }
    const float* row(std::size_t i) const noexcept { return data.data() + i * d; }
    float& at(std::size_t i, std::size_t j) noexcept { return data[i * d + j]; }
    float at(std::size_t i, std::size_t j) const noexcept { return data[i * d + j]; }
};

inline constexpr double kLayerNormEps = 1e-5;

/// Stride-equals-kernel 3D convolution of a (1, C, f, h, w) pose latent with
/// the pafs.conv weights. Output is (1, D, f/kf, h/ks, w/ks).
Grid pose_conv3d(const Grid& z_pose, const ModelParams& params);

/// Flattens conv output to tokens, projects, adds the positional embedding
/// and layer-normalizes each token.
TokenSeq pose_tokenize(const Grid& z1, const ModelParams& params);

/// Per-patch linear projection of a (1, 2C, f, h, w) concatenated latent.
TokenSeq patch_embed(const Grid& z_concat, const ModelParams& params);

/// Elementwise sum of two token sequences of identical shape.
TokenSeq fuse_additive(const TokenSeq& pose, const TokenSeq& video);

/// Mean-pools `signal` into `slots` temporal slots and lifts each slot through
/// the fixed map a -> [sin(pi (k+1) a), cos(pi (k+1) a)] for k < width/2.
TokenSeq embed_audio(std::span<const float> signal, std::size_t slots, std::size_t width);

/// The fixed sinusoidal image of one scalar, length `width`.
std::vector<float> audio_features(double value, std::size_t width);

}  // namespace unisync
