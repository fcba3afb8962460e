// Compiled with -mavx2 -mfma; only reached after the runtime CPUID check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "unisync/simd/kernels.hpp"
#include "simd/gelu_poly.hpp"

namespace unisync::simd::avx2 {

namespace {

// 4 x 16 register tile: 8 accumulators, two B loads and four broadcasts per k.
inline void tile_4x16(std::size_t k, const float* a, std::size_t lda, const float* b, std::size_t ldb, float* c,
                      std::size_t ldc, bool accumulate) {
    __m256 c00, c01, c10, c11, c20, c21, c30, c31;
    if (accumulate) {
        c00 = _mm256_loadu_ps(c);
        c01 = _mm256_loadu_ps(c + 8);
        c10 = _mm256_loadu_ps(c + ldc);
        c11 = _mm256_loadu_ps(c + ldc + 8);
        c20 = _mm256_loadu_ps(c + 2 * ldc);
        c21 = _mm256_loadu_ps(c + 2 * ldc + 8);
        c30 = _mm256_loadu_ps(c + 3 * ldc);
        c31 = _mm256_loadu_ps(c + 3 * ldc + 8);
    } else {
        c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = _mm256_setzero_ps();
    }
    for (std::size_t p = 0; p < k; ++p) {
        const __m256 b0 = _mm256_loadu_ps(b + p * ldb);
        const __m256 b1 = _mm256_loadu_ps(b + p * ldb + 8);
        __m256 av = _mm256_broadcast_ss(a + p);
        c00 = _mm256_fmadd_ps(av, b0, c00);
        c01 = _mm256_fmadd_ps(av, b1, c01);
        av = _mm256_broadcast_ss(a + lda + p);
        c10 = _mm256_fmadd_ps(av, b0, c10);
        c11 = _mm256_fmadd_ps(av, b1, c11);
        av = _mm256_broadcast_ss(a + 2 * lda + p);
        c20 = _mm256_fmadd_ps(av, b0, c20);
        c21 = _mm256_fmadd_ps(av, b1, c21);
        av = _mm256_broadcast_ss(a + 3 * lda + p);
        c30 = _mm256_fmadd_ps(av, b0, c30);
        c31 = _mm256_fmadd_ps(av, b1, c31);
    }
    _mm256_storeu_ps(c, c00);
    _mm256_storeu_ps(c + 8, c01);
    _mm256_storeu_ps(c + ldc, c10);
    _mm256_storeu_ps(c + ldc + 8, c11);
    _mm256_storeu_ps(c + 2 * ldc, c20);
    _mm256_storeu_ps(c + 2 * ldc + 8, c21);
    _mm256_storeu_ps(c + 3 * ldc, c30);
    _mm256_storeu_ps(c + 3 * ldc + 8, c31);
}

// One row against an 8-wide column strip.
inline void tile_1x8(std::size_t k, const float* a, const float* b, std::size_t ldb, float* c, bool accumulate) {
    __m256 acc = accumulate ? _mm256_loadu_ps(c) : _mm256_setzero_ps();
    for (std::size_t p = 0; p < k; ++p) {
        acc = _mm256_fmadd_ps(_mm256_broadcast_ss(a + p), _mm256_loadu_ps(b + p * ldb), acc);
    }
    _mm256_storeu_ps(c, acc);
}

inline void tile_1xn(std::size_t k, std::size_t n, const float* a, const float* b, std::size_t ldb, float* c,
                     bool accumulate) {
    for (std::size_t j = 0; j < n; ++j) {
        float acc = accumulate ? c[j] : 0.0f;
        for (std::size_t p = 0; p < k; ++p) {
            acc = std::fma(a[p], b[p * ldb + j], acc);
        }
        c[j] = acc;
    }
}

}  // namespace

void gemm(const GemmArgs& g, const float* a, const float* b, float* c) {
    const std::size_t n16 = g.n - g.n % 16;
    const std::size_t m4 = g.m - g.m % 4;
    for (std::size_t i = 0; i < m4; i += 4) {
        for (std::size_t j = 0; j < n16; j += 16) {
            tile_4x16(g.k, a + i * g.lda, g.lda, b + j, g.ldb, c + i * g.ldc + j, g.ldc, g.accumulate);
        }
    }
    for (std::size_t i = 0; i < g.m; ++i) {
        const std::size_t j0 = i < m4 ? n16 : 0;
        std::size_t j = j0;
        for (; j + 8 <= g.n; j += 8) {
            tile_1x8(g.k, a + i * g.lda, b + j, g.ldb, c + i * g.ldc + j, g.accumulate);
        }
        if (j < g.n) {
            tile_1xn(g.k, g.n - j, a + i * g.lda, b + j, g.ldb, c + i * g.ldc + j, g.accumulate);
        }
    }
}

void axpby(float* out, float a, const float* x, float b, const float* y, std::size_t n) {
    const __m256 va = _mm256_set1_ps(a);
    const __m256 vb = _mm256_set1_ps(b);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        // Same operation order as the scalar path: round(a*x) + round(b*y), no FMA contraction.
        const __m256 ax = _mm256_mul_ps(va, _mm256_loadu_ps(x + i));
        const __m256 by = _mm256_mul_ps(vb, _mm256_loadu_ps(y + i));
        _mm256_storeu_ps(out + i, _mm256_add_ps(ax, by));
    }
    for (; i < n; ++i) {
        const float ax = a * x[i];
        const float by = b * y[i];
        out[i] = ax + by;
    }
}

void select(float* out, const float* mask, const float* keep, const float* replace, std::size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 is_zero = _mm256_cmp_ps(_mm256_loadu_ps(mask + i), zero, _CMP_EQ_OQ);
        _mm256_storeu_ps(out + i, _mm256_blendv_ps(_mm256_loadu_ps(keep + i), _mm256_loadu_ps(replace + i), is_zero));
    }
    for (; i < n; ++i) {
        out[i] = mask[i] != 0.0f ? keep[i] : replace[i];
    }
}

void blend(float* out, const float* weight, const float* over, const float* base, std::size_t n) {
    const __m256 one = _mm256_set1_ps(1.0f);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 w = _mm256_loadu_ps(weight + i);
        const __m256 o = _mm256_loadu_ps(over + i);
        const __m256 v = _mm256_loadu_ps(base + i);
        const __m256 diff = _mm256_sub_ps(o, v);
        __m256 mixed = _mm256_add_ps(v, _mm256_mul_ps(w, diff));
        mixed = _mm256_max_ps(_mm256_min_ps(mixed, _mm256_max_ps(o, v)), _mm256_min_ps(o, v));
        const __m256 full = _mm256_cmp_ps(w, one, _CMP_EQ_OQ);
        _mm256_storeu_ps(out + i, _mm256_blendv_ps(mixed, o, full));
    }
    for (; i < n; ++i) {
        const float o = over[i];
        const float v = base[i];
        if (weight[i] == 1.0f) {
            out[i] = o;
            continue;
        }
        const float diff = o - v;
        const float mixed = v + weight[i] * diff;
        out[i] = std::clamp(mixed, std::min(o, v), std::max(o, v));
    }
}

void convolve_rows(const float* in, float* out, std::size_t h, std::size_t w, const float* k, std::size_t klen) {
    const std::size_t r = klen / 2;
    const auto wi = static_cast<std::ptrdiff_t>(w);
    const auto ri = static_cast<std::ptrdiff_t>(r);
    for (std::size_t y = 0; y < h; ++y) {
        const float* row = in + y * w;
        float* orow = out + y * w;
        auto scalar_at = [&](std::ptrdiff_t x) {
            float acc = 0.0f;
            for (std::ptrdiff_t j = -ri; j <= ri; ++j) {
                const std::ptrdiff_t xx = std::clamp<std::ptrdiff_t>(x + j, 0, wi - 1);
                acc += k[j + ri] * row[xx];
            }
            orow[x] = acc;
        };
        // Vector body where every tap stays inside the row.
        std::ptrdiff_t x = 0;
        for (; x < std::min(ri, wi); ++x) {
            scalar_at(x);
        }
        for (; x + 8 + ri <= wi; x += 8) {
            __m256 acc = _mm256_setzero_ps();
            for (std::ptrdiff_t j = -ri; j <= ri; ++j) {
                acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_set1_ps(k[j + ri]), _mm256_loadu_ps(row + x + j)));
            }
            _mm256_storeu_ps(orow + x, acc);
        }
        for (; x < wi; ++x) {
            scalar_at(x);
        }
    }
}

void convolve_cols(const float* in, float* out, std::size_t h, std::size_t w, const float* k, std::size_t klen) {
    const auto r = static_cast<std::ptrdiff_t>(klen / 2);
    const auto hi = static_cast<std::ptrdiff_t>(h);
    for (std::ptrdiff_t y = 0; y < hi; ++y) {
        float* orow = out + static_cast<std::size_t>(y) * w;
        std::size_t x = 0;
        for (; x + 8 <= w; x += 8) {
            __m256 acc = _mm256_setzero_ps();
            for (std::ptrdiff_t j = -r; j <= r; ++j) {
                const std::ptrdiff_t yy = std::clamp<std::ptrdiff_t>(y + j, 0, hi - 1);
                acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_set1_ps(k[j + r]),
                                                       _mm256_loadu_ps(in + static_cast<std::size_t>(yy) * w + x)));
            }
            _mm256_storeu_ps(orow + x, acc);
        }
        for (; x < w; ++x) {
            float acc = 0.0f;
            for (std::ptrdiff_t j = -r; j <= r; ++j) {
                const std::ptrdiff_t yy = std::clamp<std::ptrdiff_t>(y + j, 0, hi - 1);
                acc += k[j + r] * in[static_cast<std::size_t>(yy) * w + x];
            }
            orow[x] = acc;
        }
    }
}

namespace {

inline __m256 exp_poly(__m256 x) {
    using namespace gelu_poly;
    x = _mm256_min_ps(_mm256_max_ps(x, _mm256_set1_ps(kExpLo)), _mm256_set1_ps(kExpHi));
    const __m256 fx = _mm256_floor_ps(_mm256_add_ps(_mm256_mul_ps(x, _mm256_set1_ps(kLog2e)), _mm256_set1_ps(0.5f)));
    __m256 r = _mm256_sub_ps(x, _mm256_mul_ps(fx, _mm256_set1_ps(kLn2Hi)));
    r = _mm256_sub_ps(r, _mm256_mul_ps(fx, _mm256_set1_ps(kLn2Lo)));
    const __m256 r2 = _mm256_mul_ps(r, r);
    __m256 y = _mm256_set1_ps(kP0);
    y = _mm256_add_ps(_mm256_mul_ps(y, r), _mm256_set1_ps(kP1));
    y = _mm256_add_ps(_mm256_mul_ps(y, r), _mm256_set1_ps(kP2));
    y = _mm256_add_ps(_mm256_mul_ps(y, r), _mm256_set1_ps(kP3));
    y = _mm256_add_ps(_mm256_mul_ps(y, r), _mm256_set1_ps(kP4));
    y = _mm256_add_ps(_mm256_mul_ps(y, r), _mm256_set1_ps(kP5));
    y = _mm256_add_ps(_mm256_mul_ps(y, r2), r);
    y = _mm256_add_ps(y, _mm256_set1_ps(1.0f));
    const __m256i bits = _mm256_slli_epi32(_mm256_add_epi32(_mm256_cvtps_epi32(fx), _mm256_set1_epi32(127)), 23);
    return _mm256_mul_ps(y, _mm256_castsi256_ps(bits));
}

inline __m256 normal_cdf(__m256 x) {
    using namespace gelu_poly;
    const __m256 sign_bit = _mm256_set1_ps(-0.0f);
    const __m256 z = _mm256_mul_ps(x, _mm256_set1_ps(kInvSqrt2));
    const __m256 a = _mm256_andnot_ps(sign_bit, z);
    const __m256 one = _mm256_set1_ps(1.0f);
    const __m256 t = _mm256_div_ps(one, _mm256_add_ps(one, _mm256_mul_ps(_mm256_set1_ps(kErfP), a)));
    __m256 poly = _mm256_set1_ps(kA5);
    poly = _mm256_add_ps(_mm256_mul_ps(poly, t), _mm256_set1_ps(kA4));
    poly = _mm256_add_ps(_mm256_mul_ps(poly, t), _mm256_set1_ps(kA3));
    poly = _mm256_add_ps(_mm256_mul_ps(poly, t), _mm256_set1_ps(kA2));
    poly = _mm256_add_ps(_mm256_mul_ps(poly, t), _mm256_set1_ps(kA1));
    poly = _mm256_mul_ps(poly, t);
    const __m256 e = exp_poly(_mm256_xor_ps(_mm256_mul_ps(a, a), sign_bit));
    const __m256 mag = _mm256_sub_ps(one, _mm256_mul_ps(poly, e));
    const __m256 erf = _mm256_or_ps(_mm256_andnot_ps(sign_bit, mag), _mm256_and_ps(sign_bit, z));
    return _mm256_mul_ps(_mm256_set1_ps(0.5f), _mm256_add_ps(one, erf));
}

}  // namespace

void gelu(const float* x, float* y, float* cdf, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        const __m256 c = normal_cdf(v);
        _mm256_storeu_ps(cdf + i, c);
        _mm256_storeu_ps(y + i, _mm256_mul_ps(v, c));
    }
    if (i < n) {
        scalar::gelu(x + i, y + i, cdf + i, n - i);
    }
}

void gelu_backward(const float* x, const float* cdf, float* grad, std::size_t n) {
    using namespace gelu_poly;
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        const __m256 pdf = _mm256_mul_ps(exp_poly(_mm256_mul_ps(_mm256_mul_ps(v, v), _mm256_set1_ps(-0.5f))),
                                         _mm256_set1_ps(kInvSqrt2Pi));
        const __m256 d = _mm256_add_ps(_mm256_loadu_ps(cdf + i), _mm256_mul_ps(v, pdf));
        _mm256_storeu_ps(grad + i, _mm256_mul_ps(_mm256_loadu_ps(grad + i), d));
    }
    if (i < n) {
        scalar::gelu_backward(x + i, cdf + i, grad + i, n - i);
    }
}

}  // namespace unisync::simd::avx2
