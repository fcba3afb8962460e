#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "unisync/flow_train.hpp"
#include "unisync/frames.hpp"
#include "unisync/latent_codec.hpp"
#include "unisync/model_params.hpp"
#include "unisync/noise_schedule.hpp"
#include "unisync/pixel_composite.hpp"
#include "unisync/pose_track.hpp"
#include "unisync/tali_sample.hpp"
#include "unisync/talking_shapes.hpp"
#include "unisync/velocity_net.hpp"

namespace unisync {

/// PSNR (peak 1) over pixels where `dilated_mask` is zero. Identical frames give +inf.
/// UndefinedMetric when no pixel lies outside the mask.
double background_psnr(const FrameSequence& x_hat, const FrameSequence& x_video, const FrameSequence& dilated_mask);

/// Pearson r. UndefinedMetric when either series is constant.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

/// Pearson r between the per-frame dark-pixel count inside `mouth_mask` and the audio.
double sync_corr(const FrameSequence& x_hat, const AudioSignal& audio, const FrameSequence& mouth_mask);

/// Mean over frames of the distance between the head-pixel centroid and the track centre.
/// Detection error when a frame has no head pixels.
double pose_drift(const FrameSequence& x_hat, const PoseTrack& track);

/// Everything the dub pipeline needs besides the weights.
struct PipelineConfig {
    CodecSpec codec{};
    ModelConfig model{};
    NoiseSchedule schedule{};
    SamplerConfig sampler{};
    CompositeSpec composite{};

    void validate() const;
};

/// Encoded latents and conditioning of one clip.
TrainClip make_train_clip(const Clip& clip, const CodecSpec& codec, const ModelConfig& model);
std::vector<TrainClip> make_train_clips(const std::vector<Clip>& clips, const CodecSpec& codec,
                                        const ModelConfig& model);

struct CompositeResult {
    RawMask raw;
    FrameSequence dilated;  // one channel, binary
    FrameSequence weight;   // one channel, blurred
    FrameSequence x_hat;
};

/// Masks from the clip's pose track, then blend of `x_gen` over the source video.
/// hard = true pastes with the raw mask (no dilation, no blur).
CompositeResult composite_clip(const Clip& clip, const FrameSequence& x_gen, const CompositeSpec& spec,
                               bool hard = false);

struct DubResult {
    Grid z0;
    std::size_t injections = 0;
    FrameSequence x_gen;
    CompositeResult composite;
};

/// encode -> tali_sample -> decode -> mask -> dilate/blur -> blend.
DubResult dub_clip(const Clip& clip, const VelocityModel& model, const PipelineConfig& cfg);

struct ClipMetrics {
    double tau = 0.0;
    std::uint64_t seed = 0;
    std::size_t clip = 0;
    double background_psnr = 0.0;
    std::optional<double> sync_corr;   // empty when undefined
    std::optional<double> pose_drift;  // empty when no head is detected
    double boundary_grad = 0.0;
    bool success = false;
    std::string error;                 // why the pipeline failed, or which metric was undefined
};

/// Metrics of a finished composite. success needs background_psnr >= 10 dB (+inf counts).
ClipMetrics measure(const Clip& clip, const CompositeResult& comp);

/// Metrics of finished frames, with the masks rebuilt from the clip's track.
ClipMetrics measure_frames(const Clip& clip, const FrameSequence& x_hat, const CompositeSpec& spec);

/// One (tau, seed, clip) cell: dub then measure. Pipeline errors are caught and
/// turn into a failed cell.
ClipMetrics evaluate_cell(const Clip& clip, std::size_t clip_index, const VelocityModel& model,
                          const PipelineConfig& cfg, double tau, std::uint64_t seed);

/// Medians over cells; gsr is the success fraction. Undefined metrics are left out of
/// their median and the median is empty when nothing is left.
struct EvalSummary {
    std::size_t cells = 0;
    std::optional<double> background_psnr;
    std::optional<double> sync_corr;
    std::optional<double> pose_drift;
    std::optional<double> boundary_grad;
    double gsr = 0.0;
};

EvalSummary summarize(const std::vector<ClipMetrics>& rows);

struct SweepResult {
    std::vector<ClipMetrics> rows;  // tau-major, then seed, then clip
    std::vector<double> taus;
    std::vector<EvalSummary> per_tau;
};

/// Full pipeline for every (tau, seed, clip). `jobs` workers; results do not depend on it.
SweepResult tau_sweep(const std::vector<Clip>& clips, const VelocityModel& model, const PipelineConfig& cfg,
                      const std::vector<double>& taus, const std::vector<std::uint64_t>& seeds, std::size_t jobs = 1);

/// tau,seed,clip,background_psnr,sync_corr,pose_drift,boundary_grad,gsr
void write_metrics_csv(const std::vector<ClipMetrics>& rows, const std::filesystem::path& path);
/// Same columns, one median row per tau with seed and clip written as "*".
void write_summary_csv(const SweepResult& sweep, const std::filesystem::path& path);

/// Cell value as written to CSV: shortest round-trip decimal, "inf", or "undefined".
std::string format_metric(std::optional<double> v);

}  // namespace unisync
