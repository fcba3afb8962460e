#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "unisync/grid.hpp"
#include "unisync/model_params.hpp"
#include "unisync/pose_anchor.hpp"

namespace unisync {

/// Per-clip conditioning. The pose path is part of the network (its weights are
/// trained), so it is passed as the pose latent rather than as finished tokens.
struct Conditioning {
    Grid z_pose;     // (1, C, f, h, w); ignored when the config disables pose fusion
    TokenSeq audio;  // (f / kf) x D, one token per temporal patch row
};

enum class Mode { Train, Eval };

template <typename Real>
struct ForwardTrace {
    struct Block {
        std::vector<Real> xhat, rstd;  // block layer norm
        std::vector<Real> u;           // normalized input to fc1
        std::vector<Real> a_pre, a;    // fc1 output before/after activation
        std::vector<Real> cdf;         // normal CDF at a_pre (float GELU path)
        std::vector<Real> m;           // fc2 output
        std::vector<Real> c;           // mean over tokens of m
    };
    struct Clip {
        std::vector<Real> x_in;        // im2col of z_concat, S x 2C*P
        std::vector<Real> x_pose;      // im2col of z_pose, S x C*P
        std::vector<Real> pose_conv;   // S x D
        std::vector<Real> pose_xhat, pose_rstd;
        std::vector<Real> time_feat;
        std::vector<Block> blocks;
        std::vector<Real> h_out;       // S x D after the last block
    };
    Dims dims;
    std::vector<Clip> clips;
};

template <typename Real>
struct NetOutput {
    Dims dims;                 // (B, C, f, h, w)
    std::vector<Real> v;       // predicted velocity
    std::optional<ForwardTrace<Real>> trace;
};

template <typename Real>
struct NetGradients {
    BasicModelParams<Real> params;
    std::vector<Real> d_input;  // gradient w.r.t. z_concat, same layout
};

/// Velocity prediction for a batch. `t_bar` holds one normalized time per clip,
/// `cond` one entry per clip.
template <typename Real>
NetOutput<Real> forward(const Grid& z_concat, std::span<const double> t_bar, std::span<const Conditioning> cond,
                        const BasicModelParams<Real>& params, Mode mode);

/// Reverse pass of a train-mode forward. Throws State when the trace is absent.
template <typename Real>
NetGradients<Real> backward(const NetOutput<Real>& out, std::span<const Real> d_vhat,
                            const BasicModelParams<Real>& params);

/// Float eval-mode convenience returning a (B, C, f, h, w) grid.
Grid predict_velocity(const Grid& z_concat, std::span<const double> t_bar, std::span<const Conditioning> cond,
                      const ModelParams& params);

/// Anything that maps (z_concat, t) to a velocity; the sampler and the trainer's
/// tests accept stubs through this.
class VelocityModel {
public:
    virtual ~VelocityModel() = default;
    virtual Grid predict(const Grid& z_concat, std::span<const double> t_bar,
                         std::span<const Conditioning> cond) const = 0;
};

class NetworkModel final : public VelocityModel {
public:
    explicit NetworkModel(const ModelParams& params) : m_params(params) {}
    Grid predict(const Grid& z_concat, std::span<const double> t_bar,
                 std::span<const Conditioning> cond) const override {
        return predict_velocity(z_concat, t_bar, cond, m_params);
    }
    const ModelParams& params() const noexcept { return m_params; }

private:
    const ModelParams& m_params;
};

}  // namespace unisync
