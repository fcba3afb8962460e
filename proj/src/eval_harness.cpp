#include "unisync/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include "unisync/error.hpp"

namespace unisync {

namespace {

void require_frame_size(const FrameSequence& a, const FrameSequence& m, const char* what) {
    require(m.channels() == 1, ErrorKind::InvalidDimension, std::string(what) + ": mask must have one channel");
    require(a.frames() == m.frames() && a.height() == m.height() && a.width() == m.width(),
            ErrorKind::InvalidDimension, std::string(what) + ": mask size differs from the frames");
}

std::optional<double> median(std::vector<double> v) {
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    const double lo = v[n / 2 - 1], hi = v[n / 2];
    if (std::isinf(lo) && lo == hi) return lo;
    return 0.5 * (lo + hi);
}

}  // namespace

double background_psnr(const FrameSequence& x_hat, const FrameSequence& x_video, const FrameSequence& dilated_mask) {
    require(x_hat.same_shape(x_video), ErrorKind::InvalidDimension, "background_psnr: frame shapes differ");
    require_frame_size(x_hat, dilated_mask, "background_psnr");
    const std::size_t C = x_hat.channels();
    double sse = 0.0;
    std::size_t n = 0;
    for (std::size_t f = 0; f < x_hat.frames(); ++f)
        for (std::size_t y = 0; y < x_hat.height(); ++y)
            for (std::size_t x = 0; x < x_hat.width(); ++x) {
                if (dilated_mask.at(f, y, x, 0) != 0.0f) continue;
                for (std::size_t c = 0; c < C; ++c) {
                    const double d = static_cast<double>(x_hat.at(f, y, x, c)) - x_video.at(f, y, x, c);
                    sse += d * d;
                }
                n += C;
            }
    require(n > 0, ErrorKind::UndefinedMetric, "background_psnr: no pixels outside the mask");
    if (sse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(static_cast<double>(n) / sse);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() == b.size(), ErrorKind::InvalidInput, "pearson: series lengths differ");
    require(a.size() >= 2, ErrorKind::InvalidInput, "pearson: need at least two samples");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    require(saa > 0.0 && sbb > 0.0, ErrorKind::UndefinedMetric, "correlation undefined for a constant series");
    return sab / std::sqrt(saa * sbb);
}

double sync_corr(const FrameSequence& x_hat, const AudioSignal& audio, const FrameSequence& mouth_mask) {
    require_frame_size(x_hat, mouth_mask, "sync_corr");
    require(audio.size() == x_hat.frames(), ErrorKind::InvalidInput, "sync_corr: audio length differs from the frame count");
    require(x_hat.frames() >= 3, ErrorKind::InvalidInput, "sync_corr: need at least 3 frames");
    const std::vector<double> counts = dark_pixel_counts(x_hat, mouth_mask);
    const bool flat = std::all_of(counts.begin(), counts.end(), [&](double v) { return v == counts[0]; });
    require(!flat, ErrorKind::UndefinedMetric, "sync_corr: mouth measurement is constant");
    return pearson(counts, std::vector<double>(audio.begin(), audio.end()));
}

double pose_drift(const FrameSequence& x_hat, const PoseTrack& track) {
    require(track.size() == x_hat.frames(), ErrorKind::InvalidInput, "pose_drift: track length differs from the frame count");
    require(x_hat.channels() == 3, ErrorKind::InvalidDimension, "pose_drift: frames must be RGB");
    double total = 0.0;
    for (std::size_t f = 0; f < x_hat.frames(); ++f) {
        double sx = 0.0, sy = 0.0;
        std::size_t n = 0;
        for (std::size_t y = 0; y < x_hat.height(); ++y)
            for (std::size_t x = 0; x < x_hat.width(); ++x) {
                if (!is_head_pixel(x_hat, f, y, x)) continue;
                sx += static_cast<double>(x);
                sy += static_cast<double>(y);
                ++n;
            }
        if (n == 0) fail(ErrorKind::Detection, "pose_drift: no head pixels in frame " + std::to_string(f));
        const Point2 c = track.frames[f].center;
        total += std::hypot(sx / static_cast<double>(n) - c.x, sy / static_cast<double>(n) - c.y);
    }
    return total / static_cast<double>(x_hat.frames());
}

void PipelineConfig::validate() const {
    require(codec.spatial_factor >= 1 && codec.temporal_factor >= 1, ErrorKind::Config,
            "codec factors must be >= 1");
    model.validate();
    sampler.validate();
    composite.validate();
    if (schedule.steps != static_cast<int>(sampler.steps)) {
        fail(ErrorKind::Config, "sampler.steps (" + std::to_string(sampler.steps) + ") must equal schedule.steps (" +
                                    std::to_string(schedule.steps) + ")");
    }
}

TrainClip make_train_clip(const Clip& clip, const CodecSpec& codec, const ModelConfig& model) {
    TrainClip out;
    out.z_video = encode_frames(clip.scene.video, codec);
    const Dims d = out.z_video.dims();
    if (d.c != model.channels || d.f != model.latent_frames || d.h != model.latent_height || d.w != model.latent_width) {
        fail(ErrorKind::InvalidDimension, "clip latent " + d.str() + " does not match the model latent extents");
    }
    out.cond.z_pose = encode_frames(clip.scene.pose_video, codec);
    out.cond.audio = embed_audio(clip.audio, model.grid_frames(), model.dim);
    return out;
}

std::vector<TrainClip> make_train_clips(const std::vector<Clip>& clips, const CodecSpec& codec,
                                        const ModelConfig& model) {
    std::vector<TrainClip> out;
    out.reserve(clips.size());
    for (const Clip& c : clips) out.push_back(make_train_clip(c, codec, model));
    return out;
}

CompositeResult composite_clip(const Clip& clip, const FrameSequence& x_gen, const CompositeSpec& spec, bool hard) {
    spec.validate();
    const FrameSequence& video = clip.scene.video;
    require(x_gen.same_shape(video), ErrorKind::InvalidDimension, "composite: generated frames differ in shape from the clip");
    CompositeResult r;
    r.raw = mask_from_pose(clip.track, video.height(), video.width());
    if (hard) {
        r.dilated = r.raw.mask;
        r.weight = r.raw.mask;
    } else {
        r.dilated = dilate(r.raw.mask, spec.dilate_radius);
        r.weight = gaussian_blur(r.dilated, spec.blur_sigma);
    }
    r.x_hat = blend(x_gen, video, r.weight);
    return r;
}

DubResult dub_clip(const Clip& clip, const VelocityModel& model, const PipelineConfig& cfg) {
    cfg.validate();
    const TrainClip tc = make_train_clip(clip, cfg.codec, cfg.model);
    const RawMask raw = mask_from_pose(clip.track, clip.scene.video.height(), clip.scene.video.width());
    // latent cells touched by the dilated mouth region are generated, the rest injected
    const Grid m_lat = latent_mask_from_pixel_mask(dilate(raw.mask, cfg.composite.dilate_radius), cfg.codec);
    SampleResult s = tali_sample(tc.z_video, m_lat, tc.cond, model, cfg.sampler, cfg.schedule);
    DubResult out;
    out.x_gen = decode_latent(s.z0, cfg.codec);
    out.z0 = std::move(s.z0);
    out.injections = s.injections;
    out.composite = composite_clip(clip, out.x_gen, cfg.composite);
    return out;
}

ClipMetrics measure(const Clip& clip, const CompositeResult& comp) {
    ClipMetrics m;
    m.background_psnr = background_psnr(comp.x_hat, clip.scene.video, comp.dilated);
    m.boundary_grad = boundary_grad(comp.weight);
    std::string notes;
    try {
        m.sync_corr = sync_corr(comp.x_hat, clip.audio, clip.scene.mouth_mask);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::UndefinedMetric) throw;
        notes = e.what();
    }
    try {
        m.pose_drift = pose_drift(comp.x_hat, clip.track);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Detection) throw;
        notes += (notes.empty() ? "" : "; ") + std::string(e.what());
    }
    m.success = m.background_psnr >= 10.0;
    if (!m.success) notes += (notes.empty() ? "" : "; ") + std::string("background_psnr below 10 dB");
    m.error = notes;
    return m;
}

ClipMetrics measure_frames(const Clip& clip, const FrameSequence& x_hat, const CompositeSpec& spec) {
    CompositeResult comp = composite_clip(clip, x_hat, spec);
    comp.x_hat = x_hat;
    return measure(clip, comp);
}

ClipMetrics evaluate_cell(const Clip& clip, std::size_t clip_index, const VelocityModel& model,
                          const PipelineConfig& cfg, double tau, std::uint64_t seed) {
    PipelineConfig c = cfg;
    c.sampler.tau_inj = tau;
    c.sampler.seed = seed;
    ClipMetrics m;
    try {
        m = measure(clip, dub_clip(clip, model, c).composite);
    } catch (const Error& e) {
        // config problems are the caller's, not a failed generation
        if (e.kind() == ErrorKind::Config) throw;
        m = ClipMetrics{};
        m.background_psnr = std::numeric_limits<double>::quiet_NaN();
        m.success = false;
        m.error = e.what();
    }
    m.tau = tau;
    m.seed = seed;
    m.clip = clip_index;
    return m;
}

EvalSummary summarize(const std::vector<ClipMetrics>& rows) {
    EvalSummary s;
    s.cells = rows.size();
    std::vector<double> psnr, sync, drift, grad;
    std::size_t ok = 0;
    for (const ClipMetrics& r : rows) {
        if (r.success) ++ok;
        if (std::isnan(r.background_psnr)) continue;  // pipeline failed, nothing measured
        psnr.push_back(r.background_psnr);
        grad.push_back(r.boundary_grad);
        if (r.sync_corr) sync.push_back(*r.sync_corr);
        if (r.pose_drift) drift.push_back(*r.pose_drift);
    }
    s.background_psnr = median(psnr);
    s.sync_corr = median(sync);
    s.pose_drift = median(drift);
    s.boundary_grad = median(grad);
    s.gsr = rows.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(rows.size());
    return s;
}

SweepResult tau_sweep(const std::vector<Clip>& clips, const VelocityModel& model, const PipelineConfig& cfg,
                      const std::vector<double>& taus, const std::vector<std::uint64_t>& seeds, std::size_t jobs) {
    cfg.validate();
    require(!taus.empty() && !seeds.empty(), ErrorKind::Config, "sweep needs at least one tau and one seed");
    for (double t : taus) {
        SamplerConfig sc = cfg.sampler;
        sc.tau_inj = t;
        sc.validate();
    }
    SweepResult out;
    out.taus = taus;
    const std::size_t per_tau = seeds.size() * clips.size();
    out.rows.resize(taus.size() * per_tau);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < out.rows.size(); i = next++) {
            const std::size_t ti = i / per_tau, si = (i % per_tau) / clips.size(), ci = i % clips.size();
            out.rows[i] = evaluate_cell(clips[ci], ci, model, cfg, taus[ti], seeds[si]);
        }
    };
    const std::size_t n = std::max<std::size_t>(1, std::min(jobs, out.rows.size()));
    if (n == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < n; ++j) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (std::size_t ti = 0; ti < taus.size(); ++ti) {
        const auto first = out.rows.begin() + static_cast<std::ptrdiff_t>(ti * per_tau);
        out.per_tau.push_back(summarize(std::vector<ClipMetrics>(first, first + static_cast<std::ptrdiff_t>(per_tau))));
    }
    return out;
}

std::string format_metric(std::optional<double> v) {
    if (!v || std::isnan(*v)) return "undefined";
    if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, *v);
    return std::string(buf, res.ptr);
}

namespace {

constexpr const char* kCsvHeader = "tau,seed,clip,background_psnr,sync_corr,pose_drift,boundary_grad,gsr\n";

std::ofstream open_csv(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    require(static_cast<bool>(f), ErrorKind::Io, "cannot write " + path.string());
    f << kCsvHeader;
    return f;
}

}  // namespace

void write_metrics_csv(const std::vector<ClipMetrics>& rows, const std::filesystem::path& path) {
    std::ofstream f = open_csv(path);
    for (const ClipMetrics& r : rows) {
        f << format_metric(r.tau) << ',' << r.seed << ',' << r.clip << ',' << format_metric(r.background_psnr) << ','
          << format_metric(r.sync_corr) << ',' << format_metric(r.pose_drift) << ','
          << format_metric(r.boundary_grad) << ',' << (r.success ? 1 : 0) << '\n';
    }
    require(static_cast<bool>(f), ErrorKind::Io, "write failed: " + path.string());
}

void write_summary_csv(const SweepResult& sweep, const std::filesystem::path& path) {
    std::ofstream f = open_csv(path);
    for (std::size_t i = 0; i < sweep.taus.size(); ++i) {
        const EvalSummary& s = sweep.per_tau[i];
        f << format_metric(sweep.taus[i]) << ",*,*," << format_metric(s.background_psnr) << ','
          << format_metric(s.sync_corr) << ',' << format_metric(s.pose_drift) << ',' << format_metric(s.boundary_grad)
          << ',' << format_metric(s.gsr) << '\n';
    }
    require(static_cast<bool>(f), ErrorKind::Io, "write failed: " + path.string());
}

}  // namespace unisync
