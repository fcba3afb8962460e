// Equivalence of the AVX2 kernels against the scalar references.

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "unisync/simd/kernels.hpp"

using namespace unisync::simd;

namespace {

std::vector<float> random_vec(std::size_t n, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<float> d(lo, hi);
    std::vector<float> v(n);
    for (float& x : v) {
        x = d(gen);
    }
    return v;
}

// Double-precision triple loop, independent of both kernel paths.
std::vector<double> gemm_oracle(const GemmArgs& g, const std::vector<float>& a, const std::vector<float>& b,
                                const std::vector<float>& c0) {
    std::vector<double> c(g.m * g.ldc, 0.0);
    for (std::size_t i = 0; i < g.m; ++i) {
        for (std::size_t j = 0; j < g.n; ++j) {
            double acc = g.accumulate ? c0[i * g.ldc + j] : 0.0;
            for (std::size_t p = 0; p < g.k; ++p) {
                acc += static_cast<double>(a[i * g.lda + p]) * b[p * g.ldb + j];
            }
            c[i * g.ldc + j] = acc;
        }
    }
    return c;
}

}  // namespace

TEST_CASE("dispatch reports an isa") {
    const Isa before = active_isa();
    set_isa(Isa::Scalar);
    CHECK(active_isa() == Isa::Scalar);
    set_isa(Isa::Avx2);
    CHECK(active_isa() == (avx2_supported() ? Isa::Avx2 : Isa::Scalar));
    set_isa(before);
}

#if UNISYNC_HAVE_AVX2_KERNELS

TEST_CASE("gemm avx2 matches scalar and oracle") {
    if (!avx2_supported()) {
        return;
    }
    const std::size_t shapes[][3] = {{1, 1, 1}, {4, 16, 8}, {5, 17, 3}, {64, 12, 24}, {13, 128, 64}, {7, 24, 1024},
                                     {3, 9, 0}};
    std::uint64_t seed = 1;
    for (auto& s : shapes) {
        for (bool acc : {false, true}) {
            GemmArgs g{s[0], s[1], s[2], s[2] + 1, s[1] + 2, s[1] + 3, acc};
            auto a = random_vec(g.m * g.lda, seed++);
            auto b = random_vec(std::max<std::size_t>(g.k, 1) * g.ldb, seed++);
            auto c0 = random_vec(g.m * g.ldc, seed++);
            auto cs = c0;
            auto cv = c0;
            scalar::gemm(g, a.data(), b.data(), cs.data());
            avx2::gemm(g, a.data(), b.data(), cv.data());
            auto ref = gemm_oracle(g, a, b, c0);
            for (std::size_t i = 0; i < g.m; ++i) {
                for (std::size_t j = 0; j < g.n; ++j) {
                    const std::size_t idx = i * g.ldc + j;
                    const double tol = 1e-5 * (1.0 + std::sqrt(static_cast<double>(g.k)));
                    CHECK(std::abs(cs[idx] - ref[idx]) <= tol);
                    CHECK(std::abs(cv[idx] - ref[idx]) <= tol);
                }
                // Padding columns are untouched.
                for (std::size_t j = g.n; j < g.ldc; ++j) {
                    CHECK(cv[i * g.ldc + j] == c0[i * g.ldc + j]);
                }
            }
        }
    }
}

TEST_CASE("elementwise kernels are bit-identical across isas") {
    if (!avx2_supported()) {
        return;
    }
    for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 100u, 1027u}) {
        auto x = random_vec(n, 10 + n);
        auto y = random_vec(n, 20 + n);
        auto w = random_vec(n, 30 + n, 0.0f, 1.0f);
        auto m = random_vec(n, 40 + n, 0.0f, 1.0f);
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = m[i] < 0.5f ? 0.0f : 1.0f;
            if (i % 5 == 0) {
                w[i] = 1.0f;
            }
            if (i % 7 == 0) {
                w[i] = 0.0f;
            }
        }
        std::vector<float> o1(n), o2(n);
        scalar::axpby(o1.data(), 0.3f, x.data(), -1.7f, y.data(), n);
        avx2::axpby(o2.data(), 0.3f, x.data(), -1.7f, y.data(), n);
        CHECK(o1 == o2);
        scalar::select(o1.data(), m.data(), x.data(), y.data(), n);
        avx2::select(o2.data(), m.data(), x.data(), y.data(), n);
        CHECK(o1 == o2);
        scalar::blend(o1.data(), w.data(), x.data(), y.data(), n);
        avx2::blend(o2.data(), w.data(), x.data(), y.data(), n);
        CHECK(o1 == o2);
    }
}

TEST_CASE("separable convolution passes are bit-identical across isas") {
    if (!avx2_supported()) {
        return;
    }
    const std::size_t sizes[][2] = {{1, 1}, {5, 3}, {64, 64}, {17, 29}, {8, 40}};
    for (auto& s : sizes) {
        const std::size_t h = s[0], w = s[1];
        auto in = random_vec(h * w, h * 100 + w, 0.0f, 1.0f);
        for (std::size_t klen : {1u, 3u, 9u, 25u}) {
            auto k = random_vec(klen, klen, 0.0f, 1.0f);
            std::vector<float> a(h * w), b(h * w);
            scalar::convolve_rows(in.data(), a.data(), h, w, k.data(), klen);
            avx2::convolve_rows(in.data(), b.data(), h, w, k.data(), klen);
            CHECK(a == b);
            scalar::convolve_cols(in.data(), a.data(), h, w, k.data(), klen);
            avx2::convolve_cols(in.data(), b.data(), h, w, k.data(), klen);
            CHECK(a == b);
        }
    }
}

#endif

#if UNISYNC_HAVE_AVX2_KERNELS

TEST_CASE("gelu kernels are bit-identical across isas") {
    if (!avx2_supported()) {
        return;
    }
    for (std::size_t n : {1u, 7u, 8u, 37u, 1000u}) {
        auto x = random_vec(n, 100 + n, -9.0f, 9.0f);
        x[0] = 0.0f;
        std::vector<float> ys(n), cs(n), ya(n), ca(n);
        scalar::gelu(x.data(), ys.data(), cs.data(), n);
        avx2::gelu(x.data(), ya.data(), ca.data(), n);
        CHECK(std::memcmp(ys.data(), ya.data(), n * 4) == 0);
        CHECK(std::memcmp(cs.data(), ca.data(), n * 4) == 0);
        auto gs = random_vec(n, 200 + n);
        auto ga = gs;
        scalar::gelu_backward(x.data(), cs.data(), gs.data(), n);
        avx2::gelu_backward(x.data(), ca.data(), ga.data(), n);
        CHECK(std::memcmp(gs.data(), ga.data(), n * 4) == 0);
    }
}

#endif

TEST_CASE("gelu kernel tracks the exact erf form") {
    const auto x = random_vec(4096, 9, -12.0f, 12.0f);
    std::vector<float> y(x.size()), cdf(x.size()), g(x.size(), 1.0f);
    gelu(x, y, cdf);
    gelu_backward(x, cdf, g);
    double worst_cdf = 0, worst_grad = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i];
        const double phi = 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
        const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
        worst_cdf = std::max(worst_cdf, std::abs(cdf[i] - phi));
        worst_grad = std::max(worst_grad, std::abs(g[i] - (phi + v * pdf)));
        CHECK(std::abs(y[i] - v * phi) <= 3e-7 * std::abs(v) + 1e-7);
    }
    CHECK(worst_cdf < 3e-7);
    CHECK(worst_grad < 2e-6);
}

TEST_CASE("select never does arithmetic") {
    std::vector<float> keep{-0.0f, 1.0f, 2.0f};
    std::vector<float> rep{5.0f, 6.0f, 7.0f};
    std::vector<float> mask{1.0f, 0.0f, 1.0f};
    std::vector<float> out(3);
    select(out, mask, keep, rep);
    CHECK(std::signbit(out[0]));
    CHECK(out[1] == 6.0f);
    CHECK(out[2] == 2.0f);
}

TEST_CASE("blend identities") {
    auto over = random_vec(257, 1, 0.0f, 1.0f);
    auto base = random_vec(257, 2, 0.0f, 1.0f);
    auto w = random_vec(257, 3, 0.0f, 1.0f);
    std::vector<float> out(257);
    blend(out, std::vector<float>(257, 1.0f), over, base);
    CHECK(out == over);
    blend(out, std::vector<float>(257, 0.0f), over, base);
    CHECK(out == base);
    blend(out, w, base, base);
    CHECK(out == base);
}
