#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "unisync/grid.hpp"
#include "unisync/model_params.hpp"
#include "unisync/noise_schedule.hpp"
#include "unisync/rng.hpp"
#include "unisync/velocity_net.hpp"

namespace unisync {

enum class Weighting { Uniform, MidWeighted };

Weighting parse_weighting(const std::string& s);
const char* to_string(Weighting w) noexcept;

struct TrainConfig {
    double learning_rate = 0.02;
    double momentum = 0.9;
    std::size_t batch_size = 4;
    std::size_t steps = 2000;
    Weighting weighting = Weighting::Uniform;
    NoiseSchedule schedule{};
    std::uint64_t seed = 0;
    bool literal_eq2 = false;  // feed pure noise instead of z_t alongside z_video
    std::size_t checkpoint_every = 0;  // 0 disables periodic checkpoints

    void validate() const;
};

/// One training example with its latents already encoded.
struct TrainClip {
    Grid z_video;  // (1, C, f, h, w)
    Conditioning cond;
};

/// v = eps - z_video
Grid flow_target(const Grid& eps, const Grid& z_video);
/// z_t = alpha_t z_video + sigma_t eps
Grid interpolate(const Grid& z_video, const Grid& eps, int t, const NoiseSchedule& s);
/// omega(t); mid-weighted is 4 t(1-t) rescaled to mean 1 over t uniform on {1..T}.
double loss_weight(Weighting w, int t, int steps);

struct Draw {
    int t = 0;
    Grid eps;
};

/// Draws t uniformly on {1..T} and eps ~ N(0, I) for each clip of step `step`.
std::vector<Draw> draw_noise(const std::vector<TrainClip>& batch, std::size_t step, const TrainConfig& cfg,
                             const RngStream& rng);

/// Network inputs and regression targets for a batch and its draws.
struct FlowInputs {
    Grid z_concat;              // (B, 2C, f, h, w)
    std::vector<double> t_bar;
    std::vector<Conditioning> cond;
    Grid target;                // (B, C, f, h, w)
    std::vector<double> weight; // omega per clip
};

FlowInputs build_flow_inputs(const std::vector<TrainClip>& batch, const std::vector<Draw>& draws,
                             const TrainConfig& cfg);

/// Mean over clips of omega * mean squared error; works with any prediction.
double flow_loss_value(const FlowInputs& in, const Grid& v_hat);

struct LossAndGrad {
    double loss = 0.0;
    ModelParams grads;
};

LossAndGrad flow_loss(const ModelParams& params, const FlowInputs& in);

/// vel = mu vel + g; p -= lr vel
void sgd_momentum_update(ModelParams& params, ModelParams& velocity, const ModelParams& grads, double lr, double mu);

double grad_norm(const ModelParams& grads);

struct TrainState {
    ModelParams params;
    ModelParams velocity;
    std::size_t step = 0;

    explicit TrainState(ModelParams p);
};

struct StepResult {
    double loss = 0.0;
    double grad_norm = 0.0;
};

/// One update on `batch`. Returns the pre-update loss. Throws Diverged naming the step on a non-finite loss.
StepResult train_step(TrainState& state, const std::vector<TrainClip>& batch, const TrainConfig& cfg,
                      const RngStream& rng);

struct TrainLogRow {
    std::size_t step;
    double loss;
    double grad_norm;
};

/// Runs cfg.steps updates over batches drawn from `corpus`. Writes `train_log.csv`
/// and checkpoints into `out_dir` when it is non-empty.
std::vector<TrainLogRow> train(TrainState& state, const std::vector<TrainClip>& corpus, const TrainConfig& cfg,
                               const std::filesystem::path& out_dir = {},
                               const std::function<void(const TrainLogRow&)>& on_step = {});

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_tensor;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t probes = 0;
    double float_path_max_rel = 0.0;  // float backward vs the double analytic gradient, same probes
};

/// Central differences (step `fd_step`) of the loss against the analytic backward pass,
/// on `probes_per_group` random coordinates of every tensor. Both run in double at
/// the float parameter values so float rounding does not mask gradient bugs.
GradCheckReport grad_check(const ModelParams& params, const std::vector<TrainClip>& micro_batch,
                           const TrainConfig& cfg, std::size_t probes_per_group = 64, std::uint64_t seed = 0,
                           double fd_step = 1e-3);

/// Random latents and conditioning sized for `config`, for gradient checks and tests.
std::vector<TrainClip> synthetic_micro_batch(const ModelConfig& config, std::size_t clips, std::uint64_t seed);

}  // namespace unisync
