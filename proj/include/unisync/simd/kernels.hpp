#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference in
// kernels_scalar.cpp; x86 builds add AVX2+FMA variants in kernels_avx2.cpp.
// The active implementation is chosen once at runtime from CPUID and can be
// forced with UNISYNC_SIMD=scalar|avx2 or set_isa().

#include <cstddef>
#include <span>

namespace unisync::simd {

enum class Isa { Scalar, Avx2 };

const char* to_string(Isa isa) noexcept;
bool avx2_supported() noexcept;
Isa active_isa() noexcept;
/// Overrides dispatch. Requesting Avx2 on a CPU without it keeps Scalar.
void set_isa(Isa isa) noexcept;

/// C[M x N] (+)= A[M x K] * B[K x N], row-major with leading dimensions.
struct GemmArgs {
    std::size_t m, n, k;
    std::size_t lda, ldb, ldc;
    bool accumulate;
};

void gemm(const GemmArgs& g, const float* a, const float* b, float* c);
void gemm(const GemmArgs& g, const double* a, const double* b, double* c);

/// out = a * x + b * y
void axpby(std::span<float> out, float a, std::span<const float> x, float b, std::span<const float> y);
/// out = mask != 0 ? keep : replace. Pure selection, never arithmetic.
void select(std::span<float> out, std::span<const float> mask, std::span<const float> keep,
            std::span<const float> replace);
/// out = clamp(base + w * (over - base)) within [min, max] of the pair, with w == 1 giving `over` exactly.
void blend(std::span<float> out, std::span<const float> weight, std::span<const float> over,
           std::span<const float> base);

/// 1-D convolution along rows (horizontal) or columns (vertical) of an H x W plane,
/// kernel of odd length 2r+1 centred at r, indices clamped to the edge.
void convolve_rows(std::span<const float> in, std::span<float> out, std::size_t h, std::size_t w,
                   std::span<const float> kernel);
void convolve_cols(std::span<const float> in, std::span<float> out, std::size_t h, std::size_t w,
                   std::span<const float> kernel);

/// y = x * Phi(x) with Phi the standard normal CDF (polynomial erf, |error| < 1.5e-7); also stores Phi(x).
void gelu(std::span<const float> x, std::span<float> y, std::span<float> cdf);
/// grad *= Phi(x) + x * phi(x), reusing the CDF stored by gelu().
void gelu_backward(std::span<const float> x, std::span<const float> cdf, std::span<float> grad);

namespace scalar {
void gemm(const GemmArgs& g, const float* a, const float* b, float* c);
void gemm_double(const GemmArgs& g, const double* a, const double* b, double* c);
void axpby(float* out, float a, const float* x, float b, const float* y, std::size_t n);
void select(float* out, const float* mask, const float* keep, const float* replace, std::size_t n);
void blend(float* out, const float* weight, const float* over, const float* base, std::size_t n);
void convolve_rows(const float* in, float* out, std::size_t h, std::size_t w, const float* k, std::size_t klen);
void convolve_cols(const float* in, float* out, std::size_t h, std::size_t w, const float* k, std::size_t klen);
void gelu(const float* x, float* y, float* cdf, std::size_t n);
void gelu_backward(const float* x, const float* cdf, float* grad, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define UNISYNC_HAVE_AVX2_KERNELS 1
namespace avx2 {
void gemm(const GemmArgs& g, const float* a, const float* b, float* c);
void axpby(float* out, float a, const float* x, float b, const float* y, std::size_t n);
void select(float* out, const float* mask, const float* keep, const float* replace, std::size_t n);
void blend(float* out, const float* weight, const float* over, const float* base, std::size_t n);
void convolve_rows(const float* in, float* out, std::size_t h, std::size_t w, const float* k, std::size_t klen);
void convolve_cols(const float* in, float* out, std::size_t h, std::size_t w, const float* k, std::size_t klen);
void gelu(const float* x, float* y, float* cdf, std::size_t n);
void gelu_backward(const float* x, const float* cdf, float* grad, std::size_t n);
}  // namespace avx2
#else
#define UNISYNC_HAVE_AVX2_KERNELS 0
#endif

}  // namespace unisync::simd
