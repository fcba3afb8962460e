#include <atomic>
#include <cstdlib>
#include <string_view>

#include "unisync/error.hpp"
#include "unisync/simd/kernels.hpp"

namespace unisync::simd {

namespace {

Isa detect() noexcept {
    Isa best = avx2_supported() ? Isa::Avx2 : Isa::Scalar;
    if (const char* env = std::getenv("UNISYNC_SIMD")) {
        if (std::string_view(env) == "scalar") {
            return Isa::Scalar;
        }
    }
    return best;
}

std::atomic<Isa>& current() noexcept {
    static std::atomic<Isa> isa{detect()};
    return isa;
}

void check_len(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        fail(ErrorKind::InvalidDimension, std::string(what) + ": length mismatch");
    }
}

}  // namespace

const char* to_string(Isa isa) noexcept { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool avx2_supported() noexcept {
#if UNISYNC_HAVE_AVX2_KERNELS && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) noexcept {
    if (isa == Isa::Avx2 && !avx2_supported()) {
        isa = Isa::Scalar;
    }
    current().store(isa, std::memory_order_relaxed);
}

#if UNISYNC_HAVE_AVX2_KERNELS
#define UNISYNC_DISPATCH(fn, ...)        \
    if (active_isa() == Isa::Avx2) {     \
        avx2::fn(__VA_ARGS__);           \
    } else {                             \
        scalar::fn(__VA_ARGS__);         \
    }
#else
#define UNISYNC_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__);
#endif

void gemm(const GemmArgs& g, const float* a, const float* b, float* c) {
    if (g.m == 0 || g.n == 0) {
        return;
    }
    UNISYNC_DISPATCH(gemm, g, a, b, c)
}

void gemm(const GemmArgs& g, const double* a, const double* b, double* c) {
    if (g.m == 0 || g.n == 0) {
        return;
    }
    scalar::gemm_double(g, a, b, c);
}

void axpby(std::span<float> out, float a, std::span<const float> x, float b, std::span<const float> y) {
    check_len(out.size(), x.size(), "axpby");
    check_len(out.size(), y.size(), "axpby");
    UNISYNC_DISPATCH(axpby, out.data(), a, x.data(), b, y.data(), out.size())
}

void select(std::span<float> out, std::span<const float> mask, std::span<const float> keep,
            std::span<const float> replace) {
    check_len(out.size(), mask.size(), "select");
    check_len(out.size(), keep.size(), "select");
    check_len(out.size(), replace.size(), "select");
    UNISYNC_DISPATCH(select, out.data(), mask.data(), keep.data(), replace.data(), out.size())
}

void blend(std::span<float> out, std::span<const float> weight, std::span<const float> over,
           std::span<const float> base) {
    check_len(out.size(), weight.size(), "blend");
    check_len(out.size(), over.size(), "blend");
    check_len(out.size(), base.size(), "blend");
    UNISYNC_DISPATCH(blend, out.data(), weight.data(), over.data(), base.data(), out.size())
}

void convolve_rows(std::span<const float> in, std::span<float> out, std::size_t h, std::size_t w,
                   std::span<const float> kernel) {
    check_len(in.size(), h * w, "convolve_rows");
    check_len(out.size(), h * w, "convolve_rows");
    if (kernel.size() % 2 == 0) {
        fail(ErrorKind::InvalidInput, "convolution kernel length must be odd");
    }
    UNISYNC_DISPATCH(convolve_rows, in.data(), out.data(), h, w, kernel.data(), kernel.size())
}

void convolve_cols(std::span<const float> in, std::span<float> out, std::size_t h, std::size_t w,
                   std::span<const float> kernel) {
    check_len(in.size(), h * w, "convolve_cols");
    check_len(out.size(), h * w, "convolve_cols");
    if (kernel.size() % 2 == 0) {
        fail(ErrorKind::InvalidInput, "convolution kernel length must be odd");
    }
    UNISYNC_DISPATCH(convolve_cols, in.data(), out.data(), h, w, kernel.data(), kernel.size())
}

void gelu(std::span<const float> x, std::span<float> y, std::span<float> cdf) {
    check_len(x.size(), y.size(), "gelu");
    check_len(x.size(), cdf.size(), "gelu");
    UNISYNC_DISPATCH(gelu, x.data(), y.data(), cdf.data(), x.size())
}

void gelu_backward(std::span<const float> x, std::span<const float> cdf, std::span<float> grad) {
    check_len(x.size(), cdf.size(), "gelu_backward");
    check_len(x.size(), grad.size(), "gelu_backward");
    UNISYNC_DISPATCH(gelu_backward, x.data(), cdf.data(), grad.data(), x.size())
}

}  // namespace unisync::simd
