#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "unisync/frames.hpp"
#include "unisync/pose_track.hpp"

namespace unisync {

enum class AudioKind { Sine, TwoTone, RandomWalk };
enum class PoseKind { Static, Pan, Nod };
enum class BackgroundKind { Gradient, GradientDistractor };

AudioKind parse_audio_kind(const std::string& s);
PoseKind parse_pose_kind(const std::string& s);
BackgroundKind parse_background_kind(const std::string& s);
const char* to_string(AudioKind k) noexcept;
const char* to_string(PoseKind k) noexcept;
const char* to_string(BackgroundKind k) noexcept;

/// Per-frame envelope in [0, 1].
using AudioSignal = std::vector<float>;

struct SceneSpec {
    std::size_t frames = 16;
    std::size_t height = 64;
    std::size_t width = 64;
    double head_radius = 18.0;
    double mouth_half_width = 6.0;  // 0 gives the degenerate zero-width mouth
    BackgroundKind background = BackgroundKind::Gradient;
    std::uint64_t seed = 0;

    /// Spec error unless 0 < head_radius < min(H, W) / 3 and the frame is non-empty.
    void validate() const;
};

// Scene constants shared with the evaluator.
inline constexpr float kHeadShade = 0.8f;
inline constexpr float kFeatureShade = 0.1f;
inline constexpr float kDarkThreshold = 0.45f;
inline constexpr double kMaxAperture = 8.0;

/// Vertical semi-axis of the mouth, 1 + 7 a.
double mouth_aperture(float audio) noexcept;

AudioSignal gen_audio(AudioKind kind, std::size_t frames, std::uint64_t seed);
/// Throws Spec if the head would leave the frame.
PoseTrack gen_pose(PoseKind kind, const SceneSpec& spec);
/// Eyes and mouth placed from centre, rotation and radius.
PoseFrame place_features(Point2 center, double theta, double radius, double mouth_half_width) noexcept;

struct Scene {
    FrameSequence video;       // RGB
    FrameSequence pose_video;  // RGB, white 3x3 dots on black
    FrameSequence mouth_mask;  // one channel, mouth support at full aperture
};

Scene render_scene(const SceneSpec& spec, const PoseTrack& pose, const AudioSignal& audio);

/// Grey pixels (channels agree within 0.05) that are neither black nor white: the head
/// and its features, never the background or a blank frame.
bool is_head_pixel(const FrameSequence& frames, std::size_t f, std::size_t y, std::size_t x) noexcept;

/// Per-frame count of pixels inside the mask with luminance below kDarkThreshold.
std::vector<double> dark_pixel_counts(const FrameSequence& frames, const FrameSequence& mask);

struct Clip {
    SceneSpec spec;
    AudioKind audio_kind = AudioKind::Sine;
    PoseKind pose_kind = PoseKind::Static;
    AudioSignal audio;
    PoseTrack track;
    Scene scene;
};

/// Deterministic clip from (corpus seed, index): audio, pose and background kinds
/// cycle with the index, everything else comes from the derived seed.
Clip make_clip(const SceneSpec& base, std::uint64_t corpus_seed, std::size_t index);
/// Same clip with the mouth collapsed to zero width and a static head.
Clip make_degenerate_clip(const SceneSpec& base, std::uint64_t corpus_seed, std::size_t index);

struct CorpusSpec {
    std::size_t clips = 512;
    std::uint64_t seed = 0;
    SceneSpec scene{};
    bool include_degenerate = false;  // replaces the last clip with a degenerate one
};

std::vector<Clip> make_corpus(const CorpusSpec& spec);

/// clip_%04d/{frames/, pose/, mask/, audio.json, meta.json}
void write_clip(const Clip& clip, const std::filesystem::path& dir);
Clip read_clip(const std::filesystem::path& dir);
void write_corpus(const std::vector<Clip>& clips, const std::filesystem::path& root);
/// Every clip_* directory under root, in name order.
std::vector<Clip> read_corpus(const std::filesystem::path& root);

}  // namespace unisync
