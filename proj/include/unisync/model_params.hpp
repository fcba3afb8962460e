#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "unisync/error.hpp"
#include "unisync/rng.hpp"

namespace unisync {

enum class Activation { Gelu, Identity };

/// Architecture hyper-parameters plus the latent extents the positional embedding is sized for.
struct ModelConfig {
    std::size_t channels = 3;        // C of the video latent; the network input has 2C
    std::size_t patch_frames = 1;    // k_f
    std::size_t patch_spatial = 2;   // k_s
    std::size_t dim = 64;            // D
    std::size_t hidden = 128;        // MLP width
    std::size_t blocks = 4;          // L
    std::size_t latent_frames = 16;  // f
    std::size_t latent_height = 16;  // h
    std::size_t latent_width = 16;   // w
    Activation activation = Activation::Gelu;
    bool pafs = true;                // pose tokens fused into the input; zeroed when false

    static constexpr std::size_t kTimeFrequencies = 32;

    std::size_t grid_frames() const { return latent_frames / patch_frames; }
    std::size_t grid_height() const { return latent_height / patch_spatial; }
    std::size_t grid_width() const { return latent_width / patch_spatial; }
    std::size_t tokens() const { return grid_frames() * grid_height() * grid_width(); }
    std::size_t patch_volume() const { return patch_frames * patch_spatial * patch_spatial; }
    std::size_t patch_out() const { return channels * patch_volume(); }
    std::size_t patch_in() const { return 2 * channels * patch_volume(); }

    /// Throws InvalidDimension if the latent extents do not tile into patches.
    void validate() const;
};

template <typename Real>
struct Tensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<Real> data;

    std::size_t size() const noexcept { return data.size(); }
};

/// Fixed positions of every tensor in BasicModelParams::tensors().
struct ParamLayout {
    struct Block {
        std::size_t norm_gain, norm_bias, fc1_w, fc1_b, fc2_w, fc2_b, ctx_w, ctx_b;
    };
    std::size_t conv_w = 0, conv_b = 1, proj_w = 2, proj_b = 3, pos_embed = 4, pose_gain = 5, pose_bias = 6;
    std::size_t embed_w = 7, embed_b = 8, time_w = 9, time_b = 10;
    std::vector<Block> blocks;
    std::size_t head_w = 0, head_b = 0;

    explicit ParamLayout(std::size_t num_blocks);
};

/// Named parameter collection of the velocity network. The same type holds gradients.
template <typename Real>
class BasicModelParams {
public:
    BasicModelParams() = default;
    /// Allocates every tensor for `config`: zeros, layer-norm gains set to one.
    explicit BasicModelParams(const ModelConfig& config);

    const ModelConfig& config() const noexcept { return m_config; }
    ModelConfig& config() noexcept { return m_config; }
    const ParamLayout& layout() const noexcept { return m_layout; }

    std::vector<Tensor<Real>>& tensors() noexcept { return m_tensors; }
    const std::vector<Tensor<Real>>& tensors() const noexcept { return m_tensors; }
    Tensor<Real>& operator[](std::size_t i) noexcept { return m_tensors[i]; }
    const Tensor<Real>& operator[](std::size_t i) const noexcept { return m_tensors[i]; }

    Tensor<Real>& get(std::string_view name);
    const Tensor<Real>& get(std::string_view name) const;

    std::size_t parameter_count() const noexcept;
    void set_zero() noexcept;
    bool all_finite() const noexcept;

    template <typename Other>
    BasicModelParams<Other> cast() const {
        BasicModelParams<Other> out(m_config);
        for (std::size_t i = 0; i < m_tensors.size(); ++i) {
            for (std::size_t k = 0; k < m_tensors[i].data.size(); ++k) {
                out[i].data[k] = static_cast<Other>(m_tensors[i].data[k]);
            }
        }
        return out;
    }

private:
    ModelConfig m_config;
    ParamLayout m_layout{0};
    std::vector<Tensor<Real>> m_tensors;
};

using ModelParams = BasicModelParams<float>;

/// Scaled normal initialisation (std 1/sqrt(fan_in)); layer-norm gains 1, biases 0.
ModelParams init_params(const ModelConfig& config, RngStream rng);

/// Checkpoint: "UNIS", u32 version = 1, u32 tensor count, then per tensor
/// {u32 name length, UTF-8 name, u32 rank, u32 extents..., f32 LE data}.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params);
/// Parses a checkpoint and matches it tensor-by-tensor against `config`.
/// Format problems raise Format; name or shape disagreements raise Incompatible
/// naming the first offending tensor.
ModelParams load_checkpoint(const std::filesystem::path& path, const ModelConfig& config);
ModelParams decode_checkpoint(std::span<const std::uint8_t> bytes, const ModelConfig& config);

}  // namespace unisync
