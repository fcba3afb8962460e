#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>

#include "unisync/simd/kernels.hpp"
#include "simd/gelu_poly.hpp"

namespace unisync::simd::scalar {

namespace {

template <typename T>
void gemm_impl(const GemmArgs& g, const T* a, const T* b, T* c) {
    for (std::size_t i = 0; i < g.m; ++i) {
        T* crow = c + i * g.ldc;
        if (!g.accumulate) {
            std::fill(crow, crow + g.n, T(0));
        }
        const T* arow = a + i * g.lda;
        for (std::size_t p = 0; p < g.k; ++p) {
            const T av = arow[p];
            const T* brow = b + p * g.ldb;
            for (std::size_t j = 0; j < g.n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

}  // namespace

void gemm(const GemmArgs& g, const float* a, const float* b, float* c) { gemm_impl(g, a, b, c); }

void gemm_double(const GemmArgs& g, const double* a, const double* b, double* c) { gemm_impl(g, a, b, c); }

void axpby(float* out, float a, const float* x, float b, const float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = a * x[i] + b * y[i];
    }
}

void select(float* out, const float* mask, const float* keep, const float* replace, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = mask[i] != 0.0f ? keep[i] : replace[i];
    }
}

void blend(float* out, const float* weight, const float* over, const float* base, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const float o = over[i];
        const float v = base[i];
        if (weight[i] == 1.0f) {
            out[i] = o;
            continue;
        }
        const float mixed = v + weight[i] * (o - v);
        out[i] = std::clamp(mixed, std::min(o, v), std::max(o, v));
    }
}

void convolve_rows(const float* in, float* out, std::size_t h, std::size_t w, const float* k, std::size_t klen) {
    const auto r = static_cast<std::ptrdiff_t>(klen / 2);
    const auto wi = static_cast<std::ptrdiff_t>(w);
    for (std::size_t y = 0; y < h; ++y) {
        const float* row = in + y * w;
        for (std::ptrdiff_t x = 0; x < wi; ++x) {
            float acc = 0.0f;
            for (std::ptrdiff_t j = -r; j <= r; ++j) {
                const std::ptrdiff_t xx = std::clamp<std::ptrdiff_t>(x + j, 0, wi - 1);
                acc += k[j + r] * row[xx];
            }
            out[y * w + static_cast<std::size_t>(x)] = acc;
        }
    }
}

void convolve_cols(const float* in, float* out, std::size_t h, std::size_t w, const float* k, std::size_t klen) {
    const auto r = static_cast<std::ptrdiff_t>(klen / 2);
    const auto hi = static_cast<std::ptrdiff_t>(h);
    for (std::ptrdiff_t y = 0; y < hi; ++y) {
        float* orow = out + static_cast<std::size_t>(y) * w;
        std::fill(orow, orow + w, 0.0f);
        for (std::ptrdiff_t j = -r; j <= r; ++j) {
            const std::ptrdiff_t yy = std::clamp<std::ptrdiff_t>(y + j, 0, hi - 1);
            const float* irow = in + static_cast<std::size_t>(yy) * w;
            const float kv = k[j + r];
            for (std::size_t x = 0; x < w; ++x) {
                orow[x] += kv * irow[x];
            }
        }
    }
}

namespace {

float exp_poly(float x) {
    using namespace gelu_poly;
    x = std::min(std::max(x, kExpLo), kExpHi);
    const float fx = std::floor(x * kLog2e + 0.5f);
    float r = x - fx * kLn2Hi;
    r = r - fx * kLn2Lo;
    const float r2 = r * r;
    float y = kP0;
    y = y * r + kP1;
    y = y * r + kP2;
    y = y * r + kP3;
    y = y * r + kP4;
    y = y * r + kP5;
    y = y * r2 + r;
    y = y + 1.0f;
    const std::int32_t bits = (static_cast<std::int32_t>(fx) + 127) << 23;
    return y * std::bit_cast<float>(bits);
}

float normal_cdf(float x) {
    using namespace gelu_poly;
    const float z = x * kInvSqrt2;
    const float a = std::fabs(z);
    const float t = 1.0f / (1.0f + kErfP * a);
    float poly = kA5;
    poly = poly * t + kA4;
    poly = poly * t + kA3;
    poly = poly * t + kA2;
    poly = poly * t + kA1;
    poly = poly * t;
    const float e = exp_poly(-(a * a));
    const float erf = std::copysign(1.0f - poly * e, z);
    return 0.5f * (1.0f + erf);
}

}  // namespace

void gelu(const float* x, float* y, float* cdf, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const float c = normal_cdf(x[i]);
        cdf[i] = c;
        y[i] = x[i] * c;
    }
}

void gelu_backward(const float* x, const float* cdf, float* grad, std::size_t n) {
    using namespace gelu_poly;
    for (std::size_t i = 0; i < n; ++i) {
        const float pdf = exp_poly((x[i] * x[i]) * -0.5f) * kInvSqrt2Pi;
        grad[i] = grad[i] * (cdf[i] + x[i] * pdf);
    }
}

}  // namespace unisync::simd::scalar
