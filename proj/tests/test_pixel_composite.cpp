#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "unisync/pixel_composite.hpp"

using namespace unisync;

namespace {

PoseTrack corners_track(Point2 a, Point2 b, std::size_t frames = 1) {
    PoseTrack t;
    t.head_radius = 14;
    for (std::size_t f = 0; f < frames; ++f) {
        PoseFrame p;
        p.mouth_left = a;
        p.mouth_right = b;
        t.frames.push_back(p);
    }
    return t;
}

std::size_t count_ones(const FrameSequence& m, std::size_t f) {
    std::size_t n = 0;
    for (float v : m.frame(f)) n += v != 0.0f;
    return n;
}

FrameSequence random_binary(std::size_t frames, std::size_t h, std::size_t w, double p, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::bernoulli_distribution on(p);
    FrameSequence m(frames, h, w, 1);
    for (float& v : m.data()) v = on(gen) ? 1.0f : 0.0f;
    return m;
}

FrameSequence random_frames(std::size_t frames, std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    FrameSequence m(frames, h, w, c);
    for (float& v : m.data()) v = u(gen);
    return m;
}

// direct 2-D convolution with the outer-product kernel and clamped edges
FrameSequence dense_blur(const FrameSequence& m, double sigma) {
    const auto r = static_cast<long>(std::ceil(3 * sigma));
    std::vector<double> k;
    double s = 0;
    for (long i = -r; i <= r; ++i) {
        k.push_back(std::exp(-double(i * i) / (2 * sigma * sigma)));
        s += k.back();
    }
    for (double& v : k) v /= s;
    const long H = static_cast<long>(m.height()), W = static_cast<long>(m.width());
    FrameSequence out(m.frames(), m.height(), m.width(), 1);
    for (std::size_t f = 0; f < m.frames(); ++f)
        for (long y = 0; y < H; ++y)
            for (long x = 0; x < W; ++x) {
                double acc = 0;
                for (long dy = -r; dy <= r; ++dy)
                    for (long dx = -r; dx <= r; ++dx) {
                        const long yy = std::clamp(y + dy, 0L, H - 1), xx = std::clamp(x + dx, 0L, W - 1);
                        acc += k[dy + r] * k[dx + r] * m.at(f, yy, xx, 0);
                    }
                out.at(f, y, x, 0) = static_cast<float>(std::min(1.0, acc));
            }
    return out;
}

double max_diff(const FrameSequence& a, const FrameSequence& b) {
    double d = 0;
    for (std::size_t i = 0; i < a.data().size(); ++i) d = std::max(d, double(std::abs(a.data()[i] - b.data()[i])));
    return d;
}

template <typename F>
void check_error(F&& f, ErrorKind kind, const std::string& fragment = {}) {
    try {
        f();
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == kind);
        if (!fragment.empty()) {
            CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos, e.what());
        }
    }
}

}  // namespace

TEST_CASE("CompositeSpec validation") {
    CompositeSpec s;
    s.validate();
    s.dilate_radius = -1;
    check_error([&] { s.validate(); }, ErrorKind::Config, "composite.dilate_radius");
    s = {};
    s.blur_sigma = 0;
    check_error([&] { s.validate(); }, ErrorKind::Config, "composite.blur_sigma");
}

TEST_CASE("mouth rectangle geometry") {
    const RawMask m = mask_from_pose(corners_track({24, 30}, {40, 34}), 64, 64);
    CHECK_FALSE(m.clipped);
    // margin 0.2 * 16 = 3.2 on every side: x 20.8..43.2, y 26.8..37.2
    for (std::size_t y = 0; y < 64; ++y)
        for (std::size_t x = 0; x < 64; ++x) {
            const bool in = x >= 21 && x <= 43 && y >= 27 && y <= 37;
            REQUIRE(m.mask.at(0, y, x, 0) == (in ? 1.0f : 0.0f));
        }
    CHECK(count_ones(m.mask, 0) == 23 * 11);
}

TEST_CASE("degenerate mouth gives a single-row mask") {
    const RawMask m = mask_from_pose(corners_track({30.3, 32.7}, {30.3, 32.7}, 3), 64, 64);
    for (std::size_t f = 0; f < 3; ++f) {
        CHECK(count_ones(m.mask, f) == 1);
        CHECK(m.mask.at(f, 33, 30, 0) == 1.0f);
    }
    const RawMask flat = mask_from_pose(corners_track({20, 40}, {30, 40}), 64, 64);
    std::size_t rows = 0;
    for (std::size_t y = 0; y < 64; ++y) {
        bool any = false;
        for (std::size_t x = 0; x < 64; ++x) any |= flat.mask.at(0, y, x, 0) != 0.0f;
        rows += any;
    }
    CHECK(rows == 5);  // 0.2 * 10 = 2 px above and below the corner row
}

TEST_CASE("keypoints outside the frame are clipped and flagged") {
    const RawMask m = mask_from_pose(corners_track({-5, 10}, {8, 12}), 32, 32);
    CHECK(m.clipped);
    CHECK(m.mask.at(0, 11, 0, 0) == 1.0f);
    const RawMask gone = mask_from_pose(corners_track({-40, -40}, {-30, -38}), 32, 32);
    CHECK(gone.clipped);
    CHECK(count_ones(gone.mask, 0) == 0);
}

TEST_CASE("mask rasterization matches a point-in-rectangle reference") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-4.0, 52.0);
    PoseTrack track;
    for (int f = 0; f < 40; ++f) {
        PoseFrame p;
        p.mouth_left = {u(gen), u(gen)};
        p.mouth_right = {u(gen), u(gen)};
        track.frames.push_back(p);
    }
    const std::size_t H = 40, W = 48;
    const RawMask m = mask_from_pose(track, H, W);
    for (std::size_t f = 0; f < track.size(); ++f) {
        const auto& p = track.frames[f];
        const double w = std::abs(p.mouth_left.x - p.mouth_right.x), h = std::abs(p.mouth_left.y - p.mouth_right.y);
        const double g = 0.2 * std::max(w, h);
        const double xa = std::min(p.mouth_left.x, p.mouth_right.x) - g, xb = std::max(p.mouth_left.x, p.mouth_right.x) + g;
        const double ya = std::min(p.mouth_left.y, p.mouth_right.y) - g, yb = std::max(p.mouth_left.y, p.mouth_right.y) + g;
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x) {
                // pixel x covers [x - 0.5, x + 0.5); it is in when that cell holds the rounded edge or lies between
                const bool in = double(x) > xa - 0.5 && double(x) <= xb + 0.5 && double(y) > ya - 0.5 &&
                                double(y) <= yb + 0.5;
                REQUIRE(m.mask.at(f, y, x, 0) == (in ? 1.0f : 0.0f));
            }
    }
}

TEST_CASE("dilation") {
    const FrameSequence r = random_binary(2, 9, 11, 0.2, 1);
    CHECK(max_diff(dilate(r, 0), r) == 0.0);

    FrameSequence dot(1, 7, 7, 1);
    dot.at(0, 3, 3, 0) = 1;
    const FrameSequence d = dilate(dot, 1);
    for (std::size_t y = 0; y < 7; ++y)
        for (std::size_t x = 0; x < 7; ++x) {
            const bool in = y >= 2 && y <= 4 && x >= 2 && x <= 4;
            CHECK(d.at(0, y, x, 0) == (in ? 1.0f : 0.0f));
        }

    for (int radius : {1, 2, 5}) {
        const FrameSequence m = random_binary(3, 17, 13, 0.04, 10 + radius);
        const FrameSequence got = dilate(m, radius);
        for (std::size_t f = 0; f < 3; ++f)
            for (long y = 0; y < 17; ++y)
                for (long x = 0; x < 13; ++x) {
                    float want = 0;
                    for (long yy = y - radius; yy <= y + radius; ++yy)
                        for (long xx = x - radius; xx <= x + radius; ++xx)
                            if (yy >= 0 && yy < 17 && xx >= 0 && xx < 13) want = std::max(want, m.at(f, yy, xx, 0));
                    REQUIRE(got.at(f, y, x, 0) == want);
                }
    }
    check_error([] { dilate(FrameSequence(1, 4, 4, 3), 1); }, ErrorKind::InvalidDimension);
}

TEST_CASE("gaussian kernel") {
    for (double s : {0.3, 1.0, 2.5, 4.0}) {
        const auto k = gaussian_kernel(s);
        CHECK(k.size() == 2 * static_cast<std::size_t>(std::ceil(3 * s)) + 1);
        double sum = 0;
        for (float v : k) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        for (std::size_t i = 0; i < k.size(); ++i) CHECK(k[i] == k[k.size() - 1 - i]);
        CHECK(*std::max_element(k.begin(), k.end()) == k[k.size() / 2]);
    }
    check_error([] { gaussian_kernel(0.0); }, ErrorKind::InvalidInput);
}

TEST_CASE("blur of a constant and of an impulse") {
    const FrameSequence one(2, 20, 20, 1, 1.0f);
    for (float v : gaussian_blur(one, 2.0).data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));

    FrameSequence imp(1, 31, 31, 1);
    imp.at(0, 15, 15, 0) = 1;
    const auto k = gaussian_kernel(2.0);
    const long r = static_cast<long>(k.size() / 2);
    const FrameSequence b = gaussian_blur(imp, 2.0);
    for (long y = 0; y < 31; ++y)
        for (long x = 0; x < 31; ++x) {
            const long dy = y - 15, dx = x - 15;
            const double want = (std::abs(dy) <= r && std::abs(dx) <= r) ? double(k[dy + r]) * k[dx + r] : 0.0;
            REQUIRE(b.at(0, y, x, 0) == doctest::Approx(want).epsilon(1e-6).scale(1.0));
        }
}

TEST_CASE("separable blur equals dense convolution") {
    for (int i = 0; i < 6; ++i) {
        const double sigma = 0.7 + 0.6 * i;
        const FrameSequence m = random_binary(2, 24, 19, 0.15, 40 + i);
        CHECK(max_diff(gaussian_blur(m, sigma), dense_blur(m, sigma)) <= 1e-6);
    }
}

TEST_CASE("blurred mask keeps a plateau over the raw mask when r_d >= 3 sigma") {
    const RawMask raw = mask_from_pose(corners_track({24, 30}, {40, 34}), 64, 64);
    const CompositeSpec spec{12, 4.0};
    const FrameSequence soft = soft_mask(raw.mask, spec);
    for (std::size_t i = 0; i < soft.data().size(); ++i) {
        if (raw.mask.data()[i] == 1.0f) REQUIRE(soft.data()[i] >= 0.99f);
        REQUIRE(soft.data()[i] >= 0.0f);
        REQUIRE(soft.data()[i] <= 1.0f);
    }
    // far outside the dilated support the weight is zero
    CHECK(soft.at(0, 2, 2, 0) == 0.0f);
}

TEST_CASE("blend identities") {
    const FrameSequence g = random_frames(2, 8, 9, 3, 1);
    const FrameSequence v = random_frames(2, 8, 9, 3, 2);
    CHECK(max_diff(blend(g, v, FrameSequence(2, 8, 9, 1, 1.0f)), g) == 0.0);
    CHECK(max_diff(blend(g, v, FrameSequence(2, 8, 9, 1, 0.0f)), v) == 0.0);
    const FrameSequence w = random_frames(2, 8, 9, 1, 3);
    CHECK(max_diff(blend(v, v, w), v) == 0.0);

    const FrameSequence x = blend(g, v, w);
    for (std::size_t f = 0; f < 2; ++f)
        for (std::size_t y = 0; y < 8; ++y)
            for (std::size_t xx = 0; xx < 9; ++xx)
                for (std::size_t c = 0; c < 3; ++c) {
                    const double a = w.at(f, y, xx, 0);
                    const double o = x.at(f, y, xx, c), gg = g.at(f, y, xx, c), vv = v.at(f, y, xx, c);
                    CHECK(o == doctest::Approx(a * gg + (1 - a) * vv).epsilon(1e-6).scale(1.0));
                    CHECK(o >= std::min(gg, vv));
                    CHECK(o <= std::max(gg, vv));
                }

    check_error([&] { blend(g, random_frames(2, 8, 9, 1, 4), w); }, ErrorKind::InvalidDimension);
    check_error([&] { blend(g, v, FrameSequence(2, 8, 8, 1)); }, ErrorKind::InvalidDimension);
}

TEST_CASE("boundary gradient: hard paste against the blurred mask") {
    const RawMask raw = mask_from_pose(corners_track({24, 30}, {40, 34}, 2), 64, 64);
    CHECK(boundary_grad(raw.mask) == 1.0);
    CHECK(boundary_grad(FrameSequence(1, 8, 8, 1, 0.3f)) == 0.0);
    const CompositeSpec spec;
    const FrameSequence soft = soft_mask(raw.mask, spec);
    CHECK(boundary_grad(soft) <= boundary_grad_bound(spec.blur_sigma));
    CHECK(boundary_grad(soft) > 0.5 * boundary_grad_bound(spec.blur_sigma));
    CHECK(boundary_grad_bound(4.0) == doctest::Approx(1.05 / (4.0 * std::sqrt(2 * M_PI))));
}
