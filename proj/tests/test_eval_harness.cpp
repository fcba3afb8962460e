#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "unisync/error.hpp"
#include "unisync/eval_harness.hpp"

using namespace unisync;

namespace {

// Velocity that carries the current point straight onto z_video at t = 0.
class ExactStub final : public VelocityModel {
public:
    Grid predict(const Grid& z_concat, std::span<const double> t_bar, std::span<const Conditioning>) const override {
        const Dims d = z_concat.dims();
        const std::size_t c = d.c / 2;
        Grid v({d.b, c, d.f, d.h, d.w});
        for (std::size_t b = 0; b < d.b; ++b)
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t f = 0; f < d.f; ++f)
                    for (std::size_t y = 0; y < d.h; ++y)
                        for (std::size_t x = 0; x < d.w; ++x) {
                            v.at(b, ch, f, y, x) = static_cast<float>(
                                (static_cast<double>(z_concat.at(b, ch, f, y, x)) - z_concat.at(b, c + ch, f, y, x)) /
                                t_bar[b]);
                        }
        return v;
    }
};

class ZeroStub final : public VelocityModel {
public:
    Grid predict(const Grid& z_concat, std::span<const double>, std::span<const Conditioning>) const override {
        const Dims d = z_concat.dims();
        return Grid({d.b, d.c / 2, d.f, d.h, d.w});
    }
};

class ThrowingStub final : public VelocityModel {
public:
    Grid predict(const Grid&, std::span<const double>, std::span<const Conditioning>) const override {
        fail(ErrorKind::Diverged, "stub diverged");
    }
};

PipelineConfig pipeline(int steps = 10) {
    PipelineConfig c;
    c.schedule.steps = steps;
    c.sampler.steps = static_cast<std::size_t>(steps);
    return c;
}

template <typename F>
void check_error(ErrorKind kind, F&& f) {
    try {
        f();
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == kind);
    }
}

FrameSequence grey_block(std::size_t frames, long cx, long cy) {
    FrameSequence s(frames, 40, 40, 3);
    for (std::size_t f = 0; f < frames; ++f)
        for (std::size_t y = 0; y < 40; ++y)
            for (std::size_t x = 0; x < 40; ++x) {
                const bool head = std::abs(static_cast<long>(x) - cx) <= 2 && std::abs(static_cast<long>(y) - cy) <= 2;
                s.at(f, y, x, 0) = head ? 0.8f : 0.9f;
                s.at(f, y, x, 1) = head ? 0.8f : 0.2f;
                s.at(f, y, x, 2) = head ? 0.8f : 0.3f;
            }
    return s;
}

PoseTrack still_track(std::size_t frames, double cx, double cy) {
    PoseTrack t;
    t.head_radius = 2.0;
    t.frames.resize(frames);
    for (auto& p : t.frames) p.center = {cx, cy};
    return t;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("background_psnr") {
    const Clip c = make_clip(SceneSpec{}, 3, 0);
    const FrameSequence& v = c.scene.video;
    const FrameSequence mask = dilate(mask_from_pose(c.track, v.height(), v.width()).mask, 6);

    SUBCASE("identical frames give +inf") {
        CHECK(std::isinf(background_psnr(v, v, mask)));
        CHECK(background_psnr(v, v, mask) > 0.0);
    }
    SUBCASE("uniform 0.1 error outside the mask is 20 dB") {
        FrameSequence a(2, 8, 8, 3, 0.25f), b(2, 8, 8, 3, 0.25f);
        FrameSequence m(2, 8, 8, 1);
        for (std::size_t i = 0; i < b.data().size(); ++i) b.data()[i] = 0.375f;  // error 0.125 is exact in float
        CHECK(background_psnr(a, b, m) == doctest::Approx(20.0 * std::log10(8.0)).epsilon(1e-12));
        for (float& x : b.data()) x = 0.35f;
        CHECK(background_psnr(a, b, m) == doctest::Approx(20.0).epsilon(1e-6));
    }
    SUBCASE("random perturbation equals a reference loop") {
        FrameSequence noisy = v;
        std::mt19937_64 gen(9);
        std::uniform_real_distribution<float> d(-0.2f, 0.2f);
        for (float& x : noisy.data()) x = std::clamp(x + d(gen), 0.0f, 1.0f);
        double sse = 0.0;
        std::size_t n = 0;
        for (std::size_t f = 0; f < v.frames(); ++f)
            for (std::size_t y = 0; y < v.height(); ++y)
                for (std::size_t x = 0; x < v.width(); ++x) {
                    if (mask.at(f, y, x, 0) > 0.0f) continue;
                    for (std::size_t ch = 0; ch < 3; ++ch) {
                        const double e = static_cast<double>(noisy.at(f, y, x, ch)) - v.at(f, y, x, ch);
                        sse += e * e;
                        ++n;
                    }
                }
        CHECK(background_psnr(noisy, v, mask) == doctest::Approx(10.0 * std::log10(n / sse)).epsilon(1e-12));
    }
    SUBCASE("pixels inside the mask do not count") {
        FrameSequence edited = v;
        for (std::size_t f = 0; f < v.frames(); ++f)
            for (std::size_t y = 0; y < v.height(); ++y)
                for (std::size_t x = 0; x < v.width(); ++x)
                    if (mask.at(f, y, x, 0) > 0.0f)
                        for (std::size_t ch = 0; ch < 3; ++ch) edited.at(f, y, x, ch) = 0.0f;
        CHECK(std::isinf(background_psnr(edited, v, mask)));
    }
    SUBCASE("errors") {
        check_error(ErrorKind::UndefinedMetric,
                    [&] { background_psnr(v, v, FrameSequence(v.frames(), v.height(), v.width(), 1, 1.0f)); });
        check_error(ErrorKind::InvalidDimension, [&] { background_psnr(v, FrameSequence(1, 4, 4, 3), mask); });
        check_error(ErrorKind::InvalidDimension, [&] { background_psnr(v, v, FrameSequence(1, 4, 4, 1)); });
    }
}

TEST_CASE("pearson") {
    const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 4, 5, 4, 5};
    // reference value from the textbook formula: cov 1.2, sd 1.41421 x 1.09545
    CHECK(pearson(a, b) == doctest::Approx(1.2 / std::sqrt(2.0 * 1.2)).epsilon(1e-12));
    std::vector<double> c;
    for (double x : b) c.push_back(-3.0 * x + 7.0);
    CHECK(pearson(a, c) == doctest::Approx(-pearson(a, b)).epsilon(1e-12));
    check_error(ErrorKind::UndefinedMetric, [&] { pearson(a, std::vector<double>(5, 2.0)); });
    check_error(ErrorKind::InvalidInput, [&] { pearson(a, {1.0}); });
}

TEST_CASE("sync_corr") {
    SUBCASE("ground truth video correlates with its audio") {
        for (std::size_t i = 0; i < 9; ++i) {
            const Clip c = make_clip(SceneSpec{}, 21, i);
            CAPTURE(i);
            CHECK(sync_corr(c.scene.video, c.audio, c.scene.mouth_mask) >= 0.99);
        }
    }
    SUBCASE("affine rescaling of the audio leaves r unchanged") {
        const Clip c = make_clip(SceneSpec{}, 21, 1);
        AudioSignal scaled;
        for (float a : c.audio) scaled.push_back(0.25f * a + 3.0f);
        CHECK(sync_corr(c.scene.video, scaled, c.scene.mouth_mask) ==
              doctest::Approx(sync_corr(c.scene.video, c.audio, c.scene.mouth_mask)).epsilon(1e-5));
    }
    SUBCASE("reversed audio follows the reversal autocorrelation") {
        for (std::size_t i : {1u, 2u, 4u}) {
            const Clip c = make_clip(SceneSpec{}, 21, i);
            AudioSignal rev(c.audio.rbegin(), c.audio.rend());
            const double oracle = pearson(std::vector<double>(c.audio.begin(), c.audio.end()),
                                          std::vector<double>(rev.begin(), rev.end()));
            CAPTURE(i);
            CHECK(std::abs(sync_corr(c.scene.video, rev, c.scene.mouth_mask) - oracle) <= 0.05);
        }
    }
    SUBCASE("errors") {
        const Clip c = make_clip(SceneSpec{}, 21, 0);
        const FrameSequence flat(c.scene.video.frames(), 64, 64, 3, 0.5f);
        check_error(ErrorKind::UndefinedMetric, [&] { sync_corr(flat, c.audio, c.scene.mouth_mask); });
        check_error(ErrorKind::UndefinedMetric,
                    [&] { sync_corr(c.scene.video, AudioSignal(c.audio.size(), 0.3f), c.scene.mouth_mask); });
        check_error(ErrorKind::InvalidInput, [&] { sync_corr(c.scene.video, AudioSignal(3, 0.1f), c.scene.mouth_mask); });
    }
}

TEST_CASE("pose_drift") {
    SUBCASE("exact block centroid") {
        CHECK(pose_drift(grey_block(3, 20, 30), still_track(3, 20, 30)) == 0.0);
        CHECK(pose_drift(grey_block(3, 23, 34), still_track(3, 20, 30)) == doctest::Approx(5.0).epsilon(1e-12));
    }
    SUBCASE("ground truth renders stay within a pixel") {
        for (std::size_t i = 0; i < 9; ++i) {
            const Clip c = make_clip(SceneSpec{}, 8, i);
            CAPTURE(i);
            CHECK(pose_drift(c.scene.video, c.track) <= 1.0);
        }
    }
    SUBCASE("shifting the render by (3, 4) shifts the estimate by 5") {
        const Clip c = make_clip(SceneSpec{}, 8, 0);  // static pose
        PoseTrack moved = c.track;
        for (auto& p : moved.frames) p.center = {p.center.x - 3.0, p.center.y - 4.0};
        const double base = pose_drift(c.scene.video, c.track);
        CHECK(std::abs(pose_drift(c.scene.video, moved) - 5.0) <= base + 1e-9);
    }
    SUBCASE("blank frames") {
        check_error(ErrorKind::Detection, [] { pose_drift(FrameSequence(2, 8, 8, 3), still_track(2, 4, 4)); });
        check_error(ErrorKind::Detection, [] { pose_drift(FrameSequence(2, 8, 8, 3, 1.0f), still_track(2, 4, 4)); });
    }
}

TEST_CASE("composite_clip") {
    const Clip c = make_clip(SceneSpec{}, 4, 1);
    const CompositeSpec spec{};
    SUBCASE("generated = source leaves the source") {
        const CompositeResult r = composite_clip(c, c.scene.video, spec);
        for (std::size_t i = 0; i < r.x_hat.data().size(); ++i) REQUIRE(r.x_hat.data()[i] == c.scene.video.data()[i]);
    }
    SUBCASE("hard paste uses the raw mask as weight") {
        FrameSequence gen(c.scene.video.frames(), 64, 64, 3, 0.5f);
        const CompositeResult r = composite_clip(c, gen, spec, true);
        CHECK(boundary_grad(r.weight) == 1.0);
        for (std::size_t i = 0; i < r.weight.data().size(); ++i) REQUIRE(r.weight.data()[i] == r.raw.mask.data()[i]);
        const CompositeResult soft = composite_clip(c, gen, spec);
        CHECK(boundary_grad(soft.weight) <= boundary_grad_bound(spec.blur_sigma));
    }
    SUBCASE("shape mismatch") {
        check_error(ErrorKind::InvalidDimension, [&] { composite_clip(c, FrameSequence(1, 64, 64, 3), spec); });
    }
}

TEST_CASE("dub pipeline with an exact-velocity model") {
    const Clip c = make_clip(SceneSpec{}, 6, 4);
    const ExactStub exact;
    PipelineConfig cfg = pipeline(50);
    cfg.sampler.tau_inj = 0.8;
    const DubResult r = dub_clip(c, exact, cfg);
    CHECK(r.injections == 40);
    CHECK(r.z0.dims() == Dims{1, 3, 16, 16, 16});
    // the generated latent is the clip latent, so the decode is the codec round trip
    const Grid zv = encode_frames(c.scene.video, cfg.codec);
    CHECK(max_abs_diff(r.z0, zv) <= 1e-4);
    CHECK(r.x_gen.same_shape(c.scene.video));
    const ClipMetrics m = measure(c, r.composite);
    CHECK(m.success);
    CHECK(m.background_psnr >= 20.0);
    CHECK(m.pose_drift.has_value());
    CHECK(m.boundary_grad <= boundary_grad_bound(cfg.composite.blur_sigma));
}

TEST_CASE("pipeline config validation") {
    PipelineConfig cfg = pipeline(10);
    cfg.sampler.steps = 20;
    check_error(ErrorKind::Config, [&] { cfg.validate(); });
    cfg = pipeline(10);
    cfg.sampler.tau_inj = 1.5;
    try {
        cfg.validate();
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("sampler.tau_inj") != std::string::npos);
    }
    cfg = pipeline(10);
    cfg.model.latent_width = 8;
    const Clip c = make_clip(SceneSpec{}, 6, 0);
    check_error(ErrorKind::InvalidDimension, [&] { make_train_clip(c, cfg.codec, cfg.model); });
}

TEST_CASE("evaluate_cell turns pipeline errors into failed cells") {
    const Clip c = make_clip(SceneSpec{}, 6, 0);
    const ThrowingStub bad;
    const ClipMetrics m = evaluate_cell(c, 7, bad, pipeline(), 0.8, 3);
    CHECK_FALSE(m.success);
    CHECK(m.clip == 7);
    CHECK(m.seed == 3);
    CHECK(m.tau == 0.8);
    CHECK(m.error.find("stub diverged") != std::string::npos);
    CHECK(summarize({m}).gsr == 0.0);
    // config errors are not swallowed
    check_error(ErrorKind::Config, [&] { evaluate_cell(c, 0, bad, pipeline(), 1.5, 0); });
}

TEST_CASE("degenerate clip completes") {
    const Clip d = make_degenerate_clip(SceneSpec{}, 6, 63);
    const ExactStub exact;
    const ClipMetrics m = evaluate_cell(d, 63, exact, pipeline(), 0.8, 0);
    CHECK(m.success);
    CHECK_FALSE(m.sync_corr.has_value());  // no mouth to measure
    CHECK(m.error.find("constant") != std::string::npos);
}

TEST_CASE("summarize") {
    auto row = [](double psnr, std::optional<double> sync, bool ok) {
        ClipMetrics m;
        m.background_psnr = psnr;
        m.sync_corr = sync;
        m.pose_drift = 1.0;
        m.boundary_grad = 0.1;
        m.success = ok;
        return m;
    };
    const double inf = std::numeric_limits<double>::infinity();
    const EvalSummary odd = summarize({row(12, 0.5, true), row(30, std::nullopt, true), row(5, 0.9, false)});
    CHECK(odd.background_psnr == 12.0);
    CHECK(odd.sync_corr == doctest::Approx(0.7));
    CHECK(odd.gsr == doctest::Approx(2.0 / 3.0));
    const EvalSummary even = summarize({row(10, 0.1, true), row(20, 0.3, true), row(inf, 0.2, true), row(inf, 0.4, true)});
    CHECK(even.background_psnr == 0.5 * (20.0 + inf));
    CHECK(even.sync_corr == doctest::Approx(0.25));
    CHECK(even.gsr == 1.0);
    const EvalSummary infs = summarize({row(inf, 0.1, true), row(inf, 0.2, true)});
    CHECK(std::isinf(*infs.background_psnr));
    CHECK_FALSE(summarize({row(10, std::nullopt, true)}).sync_corr.has_value());
    CHECK(summarize({}).gsr == 0.0);
}

TEST_CASE("tau sweep") {
    const std::vector<Clip> clips{make_clip(SceneSpec{}, 2, 0), make_clip(SceneSpec{}, 2, 1)};
    const ZeroStub zero;
    const PipelineConfig cfg = pipeline(8);

    SUBCASE("one row per tau for a single clip and seed") {
        const SweepResult s = tau_sweep({clips[0]}, zero, cfg, {0.0, 0.4, 0.8}, {5});
        REQUIRE(s.rows.size() == 3);
        CHECK(s.per_tau.size() == 3);
        CHECK(s.rows[1].tau == 0.4);
        CHECK(s.rows[2].seed == 5);
    }
    SUBCASE("tau 0 equals plain sampling") {
        const SweepResult s = tau_sweep({clips[1]}, zero, cfg, {0.0}, {9});
        // plain flow loop from the same initial noise
        const TrainClip tc = make_train_clip(clips[1], cfg.codec, cfg.model);
        RngStream init = RngStream(9).split("init");
        Grid z = gaussian_noise(tc.z_video.dims(), init);
        const std::vector<Conditioning> cond{tc.cond};
        for (int t = cfg.schedule.steps; t >= 1; --t) {
            const std::vector<double> tb{cfg.schedule.normalized(t)};
            z = flow_update(z, zero.predict(concat_channels(z, tc.z_video), tb, cond), 1.0 / cfg.schedule.steps);
        }
        const ClipMetrics ref = measure(clips[1], composite_clip(clips[1], decode_latent(z, cfg.codec), cfg.composite));
        CHECK(s.rows[0].background_psnr == ref.background_psnr);
        CHECK(format_metric(s.rows[0].sync_corr) == format_metric(ref.sync_corr));
        CHECK(format_metric(s.rows[0].pose_drift) == format_metric(ref.pose_drift));
        CHECK(s.rows[0].boundary_grad == ref.boundary_grad);
    }
    SUBCASE("worker count does not change the rows") {
        const SweepResult one = tau_sweep(clips, zero, cfg, {0.0, 0.8}, {1, 2}, 1);
        const SweepResult three = tau_sweep(clips, zero, cfg, {0.0, 0.8}, {1, 2}, 3);
        REQUIRE(one.rows.size() == 8);
        unisync::testing::TempDir dir("sweep");
        write_metrics_csv(one.rows, dir.path() / "a.csv");
        write_metrics_csv(three.rows, dir.path() / "b.csv");
        CHECK(slurp(dir.path() / "a.csv") == slurp(dir.path() / "b.csv"));
        CHECK(one.rows[5].tau == 0.8);
        CHECK(one.rows[5].seed == 1);
        CHECK(one.rows[5].clip == 1);
    }
    SUBCASE("bad tau is a config error") {
        check_error(ErrorKind::Config, [&] { tau_sweep(clips, zero, cfg, {0.0, -0.1}, {1}); });
    }
}

TEST_CASE("csv output") {
    ClipMetrics a;
    a.tau = 0.8;
    a.seed = 2;
    a.clip = 11;
    a.background_psnr = std::numeric_limits<double>::infinity();
    a.pose_drift = 0.5;
    a.boundary_grad = 0.25;
    a.success = true;
    unisync::testing::TempDir dir("csv");
    write_metrics_csv({a}, dir.path() / "m.csv");
    CHECK(slurp(dir.path() / "m.csv") ==
          "tau,seed,clip,background_psnr,sync_corr,pose_drift,boundary_grad,gsr\n0.8,2,11,inf,undefined,0.5,0.25,1\n");
    SweepResult s;
    s.taus = {0.0};
    s.per_tau = {summarize({a})};
    write_summary_csv(s, dir.path() / "s.csv");
    CHECK(slurp(dir.path() / "s.csv") ==
          "tau,seed,clip,background_psnr,sync_corr,pose_drift,boundary_grad,gsr\n0,*,*,inf,undefined,0.5,0.25,1\n");
    CHECK(format_metric(0.1) == "0.1");
}
