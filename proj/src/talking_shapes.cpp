#include "unisync/talking_shapes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "unisync/error.hpp"
#include "unisync/rng.hpp"

namespace unisync {

using nlohmann::json;

namespace {

template <typename E, std::size_t N>
E parse_kind(const std::string& s, const char* const (&names)[N], const char* key) {
    for (std::size_t i = 0; i < N; ++i) {
        if (s == names[i]) return static_cast<E>(i);
    }
    std::string opts;
    for (std::size_t i = 0; i < N; ++i) opts += (i ? ", " : "") + std::string(names[i]);
    fail(ErrorKind::Config, std::string(key) + ": unknown kind '" + s + "' (expected " + opts + ")");
}

constexpr const char* kAudioNames[] = {"sine", "two-tone", "random-walk"};
constexpr const char* kPoseNames[] = {"static", "pan", "nod"};
constexpr const char* kBackgroundNames[] = {"gradient", "gradient+distractor"};

constexpr double kPanHalfRange = 8.0;
constexpr double kNodAmplitude = 0.2;
constexpr double kEyeRadius = 2.0;
constexpr double kDistractorRadius = 5.0;

Point2 rotate(Point2 v, double theta) noexcept {
    const double c = std::cos(theta), s = std::sin(theta);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

Point2 add(Point2 a, Point2 b) noexcept { return {a.x + b.x, a.y + b.y}; }

}  // namespace

AudioKind parse_audio_kind(const std::string& s) { return parse_kind<AudioKind>(s, kAudioNames, "synth.audio"); }
PoseKind parse_pose_kind(const std::string& s) { return parse_kind<PoseKind>(s, kPoseNames, "synth.pose"); }
BackgroundKind parse_background_kind(const std::string& s) {
    return parse_kind<BackgroundKind>(s, kBackgroundNames, "synth.background");
}
const char* to_string(AudioKind k) noexcept { return kAudioNames[static_cast<int>(k)]; }
const char* to_string(PoseKind k) noexcept { return kPoseNames[static_cast<int>(k)]; }
const char* to_string(BackgroundKind k) noexcept { return kBackgroundNames[static_cast<int>(k)]; }

void SceneSpec::validate() const {
    if (frames == 0 || height == 0 || width == 0) {
        fail(ErrorKind::Spec, "scene dimensions must be positive");
    }
    const double limit = static_cast<double>(std::min(height, width)) / 3.0;
    if (!(head_radius > 0.0 && head_radius < limit)) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "head radius %g must lie in (0, %g) for a %zux%zu frame", head_radius, limit,
                      height, width);
        fail(ErrorKind::Spec, buf);
    }
    if (!(mouth_half_width >= 0.0)) {
        fail(ErrorKind::Spec, "mouth half width must be >= 0");
    }
}

double mouth_aperture(float audio) noexcept { return 1.0 + 7.0 * static_cast<double>(audio); }

AudioSignal gen_audio(AudioKind kind, std::size_t frames, std::uint64_t seed) {
    require(frames >= 1, ErrorKind::InvalidInput, "gen_audio: need at least one frame");
    AudioSignal a(frames);
    const double F = static_cast<double>(frames);
    auto tone = [&](double f0, std::size_t t) { return std::sin(2.0 * std::numbers::pi * f0 * static_cast<double>(t) / F); };
    switch (kind) {
    case AudioKind::Sine:
        for (std::size_t t = 0; t < frames; ++t) a[t] = static_cast<float>(0.5 + 0.5 * tone(2.0, t));
        break;
    case AudioKind::TwoTone:
        // mean of two unit sines lies in [-1, 1]
        for (std::size_t t = 0; t < frames; ++t) {
            a[t] = static_cast<float>(0.5 + 0.25 * (tone(2.0, t) + tone(5.0, t)));
        }
        break;
    case AudioKind::RandomWalk: {
        RngStream rng = RngStream(seed).split("audio");
        double v = 0.5;
        for (std::size_t t = 0; t < frames; ++t) {
            a[t] = static_cast<float>(v);
            v = std::clamp(v + 0.1 * rng.normal(), 0.0, 1.0);
        }
        break;
    }
    }
    return a;
}

PoseFrame place_features(Point2 center, double theta, double radius, double mouth_half_width) noexcept {
    PoseFrame p;
    p.center = center;
    p.theta = theta;
    p.eye_left = add(center, rotate({-0.4 * radius, -0.3 * radius}, theta));
    p.eye_right = add(center, rotate({0.4 * radius, -0.3 * radius}, theta));
    p.mouth_center = add(center, rotate({0.0, 0.5 * radius}, theta));
    p.mouth_left = add(p.mouth_center, rotate({-mouth_half_width, 0.0}, theta));
    p.mouth_right = add(p.mouth_center, rotate({mouth_half_width, 0.0}, theta));
    return p;
}

PoseTrack gen_pose(PoseKind kind, const SceneSpec& spec) {
    spec.validate();
    RngStream rng = RngStream(spec.seed).split("pose");
    const double r = spec.head_radius;
    const double cx = 0.5 * static_cast<double>(spec.width - 1) + (rng.uniform() * 6.0 - 3.0);
    const double cy = 0.5 * static_cast<double>(spec.height - 1) + (rng.uniform() * 6.0 - 3.0);
    const double phase = rng.uniform() * 2.0 * std::numbers::pi;
    const double F = static_cast<double>(spec.frames);

    PoseTrack track;
    track.head_radius = r;
    for (std::size_t t = 0; t < spec.frames; ++t) {
        Point2 c{cx, cy};
        double theta = 0.0;
        if (kind == PoseKind::Pan) {
            const double u = spec.frames > 1 ? static_cast<double>(t) / (F - 1.0) : 0.5;
            c.x = cx - kPanHalfRange + 2.0 * kPanHalfRange * u;
        } else if (kind == PoseKind::Nod) {
            theta = kNodAmplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / F + phase);
        }
        if (c.x - r < 0.0 || c.y - r < 0.0 || c.x + r > static_cast<double>(spec.width - 1) ||
            c.y + r > static_cast<double>(spec.height - 1)) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "head would leave the frame at frame %zu (centre %.1f, %.1f)", t, c.x, c.y);
            fail(ErrorKind::Spec, buf);
        }
        track.frames.push_back(place_features(c, theta, r, spec.mouth_half_width));
    }
    return track;
}

namespace {

struct Background {
    int high = 2;       // channel kept bright
    double dx = 1, dy = 0;
    bool distractor = false;
    Point2 spot;
    float spot_rgb[3] = {0.95f, 0.35f, 0.15f};
};

Background make_background(const SceneSpec& spec) {
    RngStream rng = RngStream(spec.seed).split("background");
    Background b;
    b.high = static_cast<int>(rng.uniform_int(0, 2));
    const double a = rng.uniform() * 2.0 * std::numbers::pi;
    b.dx = std::cos(a);
    b.dy = std::sin(a);
    b.distractor = spec.background == BackgroundKind::GradientDistractor;
    const auto corner = rng.uniform_int(0, 3);
    const double m = kDistractorRadius + 2.0;
    b.spot = {corner % 2 ? static_cast<double>(spec.width - 1) - m : m, corner / 2 ? static_cast<double>(spec.height - 1) - m : m};
    return b;
}

// Channel spread stays >= 0.2 everywhere so the background never reads as head grey.
void background_rgb(const Background& b, const SceneSpec& spec, std::size_t y, std::size_t x, float out[3]) {
    const double u = (b.dx * static_cast<double>(x) / static_cast<double>(spec.width) +
                      b.dy * static_cast<double>(y) / static_cast<double>(spec.height) + 1.0) /
                     2.0;  // in [0, 1]
    const float lo1 = static_cast<float>(0.15 + 0.45 * u);
    const float lo2 = static_cast<float>(0.55 - 0.40 * u);
    const float hi = static_cast<float>(0.90 - 0.10 * u);
    int k = 0;
    for (int c = 0; c < 3; ++c) {
        out[c] = c == b.high ? hi : (k++ == 0 ? lo1 : lo2);
    }
    if (b.distractor) {
        const double ddx = static_cast<double>(x) - b.spot.x, ddy = static_cast<double>(y) - b.spot.y;
        if (ddx * ddx + ddy * ddy <= kDistractorRadius * kDistractorRadius) {
            for (int c = 0; c < 3; ++c) out[c] = b.spot_rgb[c];
        }
    }
}

bool in_disc(double x, double y, Point2 c, double r) {
    const double dx = x - c.x, dy = y - c.y;
    return dx * dx + dy * dy <= r * r;
}

// Axis-aligned ellipse about the anchor snapped to the pixel grid, drawn as one run
// of rows per column. Column heights carry their rounding error to the next column,
// so the frame total is the ellipse area rounded and stays affine in the aperture.
struct MouthRaster {
    long x0 = 0, y0 = 0;
    std::vector<long> heights;  // rows per column, centred on y0

    bool contains(long x, long y) const {
        const long i = x - x0;
        if (i < 0 || i >= static_cast<long>(heights.size())) return false;
        const long n = heights[static_cast<std::size_t>(i)];
        const long top = y0 - (n - 1) / 2;
        return n > 0 && y >= top && y < top + n;
    }
};

std::vector<long> mouth_heights(double half_width, double aperture) {
    const auto r = static_cast<long>(std::floor(half_width));
    std::vector<long> h;
    double cum = 0.0;
    long emitted = 0;
    for (long dx = -r; dx <= r; ++dx) {
        const double q = static_cast<double>(dx) / half_width;
        cum += 2.0 * aperture * std::sqrt(std::max(0.0, 1.0 - q * q)) + 1.0;
        const long n = std::llround(cum) - emitted;
        emitted += n;
        h.push_back(n);
    }
    return h;
}

MouthRaster mouth_raster(const PoseFrame& p, double half_width, double aperture) {
    MouthRaster m;
    if (half_width <= 0.0) return m;
    m.heights = mouth_heights(half_width, aperture);
    // never outgrow the full-aperture support the mask is built from
    const std::vector<long> cap = mouth_heights(half_width, kMaxAperture);
    for (std::size_t i = 0; i < m.heights.size(); ++i) m.heights[i] = std::min(m.heights[i], cap[i]);
    m.x0 = std::lround(p.mouth_center.x) - static_cast<long>(m.heights.size() / 2);
    m.y0 = std::lround(p.mouth_center.y);
    return m;
}

}  // namespace

Scene render_scene(const SceneSpec& spec, const PoseTrack& pose, const AudioSignal& audio) {
    spec.validate();
    require(pose.size() == spec.frames && audio.size() == spec.frames, ErrorKind::InvalidInput,
            "render_scene: pose and audio lengths must equal the frame count");
    const Background bg = make_background(spec);
    Scene s{FrameSequence(spec.frames, spec.height, spec.width, 3), FrameSequence(spec.frames, spec.height, spec.width, 3),
            FrameSequence(spec.frames, spec.height, spec.width, 1)};
    for (std::size_t f = 0; f < spec.frames; ++f) {
        const PoseFrame& p = pose.frames[f];
        const MouthRaster mouth = mouth_raster(p, spec.mouth_half_width, mouth_aperture(audio[f]));
        const MouthRaster support = mouth_raster(p, spec.mouth_half_width, kMaxAperture);
        for (std::size_t y = 0; y < spec.height; ++y)
            for (std::size_t x = 0; x < spec.width; ++x) {
                const double fx = static_cast<double>(x), fy = static_cast<double>(y);
                float rgb[3];
                background_rgb(bg, spec, y, x, rgb);
                if (in_disc(fx, fy, p.center, pose.head_radius)) {
                    float v = kHeadShade;
                    if (in_disc(fx, fy, p.eye_left, kEyeRadius) || in_disc(fx, fy, p.eye_right, kEyeRadius) ||
                        mouth.contains(static_cast<long>(x), static_cast<long>(y))) {
                        v = kFeatureShade;
                    }
                    rgb[0] = rgb[1] = rgb[2] = v;
                }
                for (int c = 0; c < 3; ++c) s.video.at(f, y, x, static_cast<std::size_t>(c)) = rgb[c];
                if (support.contains(static_cast<long>(x), static_cast<long>(y))) s.mouth_mask.at(f, y, x, 0) = 1.0f;
            }
        for (const Point2& k : p.keypoints()) {
            const long kx = std::lround(k.x), ky = std::lround(k.y);
            for (long y = ky - 1; y <= ky + 1; ++y)
                for (long x = kx - 1; x <= kx + 1; ++x) {
                    if (y < 0 || x < 0 || y >= static_cast<long>(spec.height) || x >= static_cast<long>(spec.width)) continue;
                    for (std::size_t c = 0; c < 3; ++c) {
                        s.pose_video.at(f, static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = 1.0f;
                    }
                }
        }
    }
    return s;
}

bool is_head_pixel(const FrameSequence& frames, std::size_t f, std::size_t y, std::size_t x) noexcept {
    float lo = frames.at(f, y, x, 0), hi = lo;
    for (std::size_t c = 1; c < frames.channels(); ++c) {
        lo = std::min(lo, frames.at(f, y, x, c));
        hi = std::max(hi, frames.at(f, y, x, c));
    }
    // grey, and neither black nor white (blank frames hold no head)
    return hi - lo < 0.05f && lo > 0.05f && hi < 0.95f;
}

std::vector<double> dark_pixel_counts(const FrameSequence& frames, const FrameSequence& mask) {
    require(mask.channels() == 1 && mask.frames() == frames.frames() && mask.height() == frames.height() &&
                mask.width() == frames.width(),
            ErrorKind::InvalidDimension, "dark_pixel_counts: mask must be one channel matching the frames");
    std::vector<double> n(frames.frames(), 0.0);
    for (std::size_t f = 0; f < frames.frames(); ++f)
        for (std::size_t y = 0; y < frames.height(); ++y)
            for (std::size_t x = 0; x < frames.width(); ++x) {
                if (mask.at(f, y, x, 0) != 0.0f && frames.luminance(f, y, x) < kDarkThreshold) n[f] += 1.0;
            }
    return n;
}

namespace {

std::uint64_t clip_seed(std::uint64_t corpus_seed, std::size_t index) {
    return RngStream(corpus_seed).split("clip", index).next_u64();
}

Clip build_clip(SceneSpec spec, AudioKind ak, PoseKind pk) {
    Clip c;
    c.spec = spec;
    c.audio_kind = ak;
    c.pose_kind = pk;
    c.audio = gen_audio(ak, spec.frames, spec.seed);
    c.track = gen_pose(pk, spec);
    c.scene = render_scene(spec, c.track, c.audio);
    return c;
}

}  // namespace

Clip make_clip(const SceneSpec& base, std::uint64_t corpus_seed, std::size_t index) {
    SceneSpec spec = base;
    spec.seed = clip_seed(corpus_seed, index);
    spec.background = (index / 9) % 2 ? BackgroundKind::GradientDistractor : BackgroundKind::Gradient;
    return build_clip(spec, static_cast<AudioKind>(index % 3), static_cast<PoseKind>((index / 3) % 3));
}

Clip make_degenerate_clip(const SceneSpec& base, std::uint64_t corpus_seed, std::size_t index) {
    SceneSpec spec = base;
    spec.seed = clip_seed(corpus_seed, index);
    spec.mouth_half_width = 0.0;
    return build_clip(spec, AudioKind::Sine, PoseKind::Static);
}

std::vector<Clip> make_corpus(const CorpusSpec& spec) {
    std::vector<Clip> out;
    out.reserve(spec.clips);
    for (std::size_t i = 0; i < spec.clips; ++i) {
        const bool degenerate = spec.include_degenerate && i + 1 == spec.clips;
        out.push_back(degenerate ? make_degenerate_clip(spec.scene, spec.seed, i) : make_clip(spec.scene, spec.seed, i));
    }
    return out;
}

namespace {

json point_json(Point2 p) { return json::array({p.x, p.y}); }
Point2 point_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << text << '\n';
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::Format, path.string() + ": " + e.what());
    }
}

}  // namespace

void write_clip(const Clip& clip, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_frames(clip.scene.video, dir / "frames");
    write_frames(clip.scene.pose_video, dir / "pose");
    write_frames(clip.scene.mouth_mask, dir / "mask");
    json audio = json::array();
    for (float a : clip.audio) audio.push_back(static_cast<double>(a));
    write_text(dir / "audio.json", audio.dump());

    json track = json::array();
    for (const PoseFrame& p : clip.track.frames) {
        track.push_back({{"center", point_json(p.center)},
                         {"theta", p.theta},
                         {"eye_left", point_json(p.eye_left)},
                         {"eye_right", point_json(p.eye_right)},
                         {"mouth_center", point_json(p.mouth_center)},
                         {"mouth_left", point_json(p.mouth_left)},
                         {"mouth_right", point_json(p.mouth_right)}});
    }
    const json meta = {{"frames", clip.spec.frames},
                       {"height", clip.spec.height},
                       {"width", clip.spec.width},
                       {"head_radius", clip.spec.head_radius},
                       {"mouth_half_width", clip.spec.mouth_half_width},
                       {"background", to_string(clip.spec.background)},
                       {"seed", clip.spec.seed},
                       {"audio_kind", to_string(clip.audio_kind)},
                       {"pose_kind", to_string(clip.pose_kind)},
                       {"track", track}};
    write_text(dir / "meta.json", meta.dump(2));
}

Clip read_clip(const std::filesystem::path& dir) {
    const json meta = read_json(dir / "meta.json");
    const json audio = read_json(dir / "audio.json");
    Clip c;
    try {
        c.spec.frames = meta.at("frames").get<std::size_t>();
        c.spec.height = meta.at("height").get<std::size_t>();
        c.spec.width = meta.at("width").get<std::size_t>();
        c.spec.head_radius = meta.at("head_radius").get<double>();
        c.spec.mouth_half_width = meta.at("mouth_half_width").get<double>();
        c.spec.background = parse_background_kind(meta.at("background").get<std::string>());
        c.spec.seed = meta.at("seed").get<std::uint64_t>();
        c.audio_kind = parse_audio_kind(meta.at("audio_kind").get<std::string>());
        c.pose_kind = parse_pose_kind(meta.at("pose_kind").get<std::string>());
        c.track.head_radius = c.spec.head_radius;
        for (const json& p : meta.at("track")) {
            PoseFrame f;
            f.center = point_from(p.at("center"));
            f.theta = p.at("theta").get<double>();
            f.eye_left = point_from(p.at("eye_left"));
            f.eye_right = point_from(p.at("eye_right"));
            f.mouth_center = point_from(p.at("mouth_center"));
            f.mouth_left = point_from(p.at("mouth_left"));
            f.mouth_right = point_from(p.at("mouth_right"));
            c.track.frames.push_back(f);
        }
        for (const json& a : audio) c.audio.push_back(a.get<float>());
    } catch (const json::exception& e) {
        fail(ErrorKind::Format, (dir / "meta.json").string() + ": " + e.what());
    }
    c.scene.video = read_frames(dir / "frames");
    c.scene.pose_video = read_frames(dir / "pose");
    c.scene.mouth_mask = read_frames(dir / "mask");
    require(c.audio.size() == c.spec.frames && c.track.size() == c.spec.frames && c.scene.video.frames() == c.spec.frames,
            ErrorKind::Format, dir.string() + ": frame counts disagree between meta.json, audio.json and frames/");
    return c;
}

void write_corpus(const std::vector<Clip>& clips, const std::filesystem::path& root) {
    for (std::size_t i = 0; i < clips.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "clip_%04zu", i);
        write_clip(clips[i], root / name);
    }
}

std::vector<Clip> read_corpus(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root)) fail(ErrorKind::Io, "corpus directory not found: " + root.string());
    std::vector<std::filesystem::path> dirs;
    for (const auto& e : std::filesystem::directory_iterator(root)) {
        if (e.is_directory() && e.path().filename().string().rfind("clip_", 0) == 0) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    std::vector<Clip> out;
    for (const auto& d : dirs) out.push_back(read_clip(d));
    return out;
}

}  // namespace unisync
