#pragma once

// Dense building blocks shared by the pose path, the velocity network and its
// backward pass. Templated so the same code runs in float (production) and
// double (gradient checking).

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "unisync/simd/kernels.hpp"

namespace unisync::detail {

template <typename Real>
struct Mat {
    std::size_t rows = 0, cols = 0;
    std::vector<Real> v;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, Real(0)) {}

    Real* row(std::size_t i) noexcept { return v.data() + i * cols; }
    const Real* row(std::size_t i) const noexcept { return v.data() + i * cols; }
};

struct PatchGeom {
    std::size_t channels, f, h, w, kf, ks;

    std::size_t gf() const noexcept { return f / kf; }
    std::size_t gh() const noexcept { return h / ks; }
    std::size_t gw() const noexcept { return w / ks; }
    std::size_t tokens() const noexcept { return gf() * gh() * gw(); }
    std::size_t cols() const noexcept { return channels * kf * ks * ks; }
};

// Gathers non-overlapping patches of a (C, f, h, w) block into S rows. Column
// order is (c, df, dy, dx), matching a [D, C, kf, ks, ks] weight.
template <typename Real, typename Src>
Mat<Real> im2col(const Src* src, const PatchGeom& g) {
    Mat<Real> out(g.tokens(), g.cols());
    std::size_t s = 0;
    for (std::size_t fi = 0; fi < g.gf(); ++fi) {
        for (std::size_t yi = 0; yi < g.gh(); ++yi) {
            for (std::size_t xi = 0; xi < g.gw(); ++xi, ++s) {
                Real* r = out.row(s);
                std::size_t col = 0;
                for (std::size_t c = 0; c < g.channels; ++c) {
                    for (std::size_t df = 0; df < g.kf; ++df) {
                        for (std::size_t dy = 0; dy < g.ks; ++dy) {
                            const Src* line = src + ((c * g.f + fi * g.kf + df) * g.h + yi * g.ks + dy) * g.w + xi * g.ks;
                            for (std::size_t dx = 0; dx < g.ks; ++dx) {
                                r[col++] = static_cast<Real>(line[dx]);
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

// Inverse of im2col (patches do not overlap, so this is a pure scatter).
template <typename Real, typename Dst>
void col2im(const Mat<Real>& m, Dst* dst, const PatchGeom& g) {
    std::size_t s = 0;
    for (std::size_t fi = 0; fi < g.gf(); ++fi) {
        for (std::size_t yi = 0; yi < g.gh(); ++yi) {
            for (std::size_t xi = 0; xi < g.gw(); ++xi, ++s) {
                const Real* r = m.row(s);
                std::size_t col = 0;
                for (std::size_t c = 0; c < g.channels; ++c) {
                    for (std::size_t df = 0; df < g.kf; ++df) {
                        for (std::size_t dy = 0; dy < g.ks; ++dy) {
                            Dst* line = dst + ((c * g.f + fi * g.kf + df) * g.h + yi * g.ks + dy) * g.w + xi * g.ks;
                            for (std::size_t dx = 0; dx < g.ks; ++dx) {
                                line[dx] = static_cast<Dst>(r[col++]);
                            }
                        }
                    }
                }
            }
        }
    }
}

// y = x * W^T + b for W stored [out, in] with row stride ldw.
template <typename Real>
Mat<Real> linear(const Mat<Real>& x, const Real* w, std::size_t ldw, std::size_t out, const Real* bias) {
    const std::size_t in = x.cols;
    std::vector<Real> wt(in * out);
    for (std::size_t o = 0; o < out; ++o) {
        for (std::size_t i = 0; i < in; ++i) {
            wt[i * out + o] = w[o * ldw + i];
        }
    }
    Mat<Real> y(x.rows, out);
    simd::gemm({x.rows, out, in, in, out, out, false}, x.v.data(), wt.data(), y.v.data());
    if (bias != nullptr) {
        for (std::size_t s = 0; s < y.rows; ++s) {
            Real* r = y.row(s);
            for (std::size_t o = 0; o < out; ++o) {
                r[o] += bias[o];
            }
        }
    }
    return y;
}

// Column sums of dy with double accumulation, added into db.
template <typename Real>
void add_column_sums(const Mat<Real>& dy, Real* db) {
    std::vector<double> acc(dy.cols, 0.0);
    for (std::size_t s = 0; s < dy.rows; ++s) {
        const Real* r = dy.row(s);
        for (std::size_t o = 0; o < dy.cols; ++o) {
            acc[o] += static_cast<double>(r[o]);
        }
    }
    for (std::size_t o = 0; o < dy.cols; ++o) {
        db[o] += static_cast<Real>(acc[o]);
    }
}

template <typename Real>
Mat<Real> transpose(const Mat<Real>& m) {
    Mat<Real> t(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            t.v[j * m.rows + i] = m.v[i * m.cols + j];
        }
    }
    return t;
}

// dW[out, in] (row stride ldw) += dy^T x
template <typename Real>
void accumulate_weight_grad(const Mat<Real>& x, const Mat<Real>& dy, Real* dw, std::size_t ldw) {
    const Mat<Real> dyt = transpose(dy);
    simd::gemm({dy.cols, x.cols, x.rows, x.rows, x.cols, ldw, true}, dyt.v.data(), x.v.data(), dw);
}

// dx = dy * W for W stored [out, in] with row stride ldw.
template <typename Real>
Mat<Real> input_grad(const Mat<Real>& dy, const Real* w, std::size_t ldw, std::size_t in) {
    Mat<Real> dx(dy.rows, in);
    simd::gemm({dy.rows, in, dy.cols, dy.cols, ldw, in, false}, dy.v.data(), w, dx.v.data());
    return dx;
}

template <typename Real>
struct NormCache {
    Mat<Real> xhat;
    std::vector<Real> rstd;
};

// Per-row layer norm: (x - mean) / sqrt(var + eps) * gain + bias, biased variance.
template <typename Real>
Mat<Real> layer_norm(const Mat<Real>& x, const Real* gain, const Real* bias, double eps, NormCache<Real>* cache) {
    Mat<Real> y(x.rows, x.cols);
    Mat<Real> xhat(x.rows, x.cols);
    std::vector<Real> rstd(x.rows);
    const double n = static_cast<double>(x.cols);
    for (std::size_t s = 0; s < x.rows; ++s) {
        const Real* r = x.row(s);
        double mean = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            mean += static_cast<double>(r[j]);
        }
        mean /= n;
        double var = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            const double d = static_cast<double>(r[j]) - mean;
            var += d * d;
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + eps);
        rstd[s] = static_cast<Real>(inv);
        Real* xh = xhat.row(s);
        Real* out = y.row(s);
        for (std::size_t j = 0; j < x.cols; ++j) {
            xh[j] = static_cast<Real>((static_cast<double>(r[j]) - mean) * inv);
            out[j] = xh[j] * gain[j] + bias[j];
        }
    }
    if (cache != nullptr) {
        cache->xhat = std::move(xhat);
        cache->rstd = std::move(rstd);
    }
    return y;
}

// Returns dx; accumulates gain/bias gradients.
template <typename Real>
Mat<Real> layer_norm_backward(const Mat<Real>& dy, const NormCache<Real>& cache, const Real* gain, Real* dgain,
                              Real* dbias) {
    const std::size_t n = dy.cols;
    Mat<Real> dx(dy.rows, n);
    std::vector<double> dg(n, 0.0), db(n, 0.0);
    std::vector<double> dxhat(n);
    for (std::size_t s = 0; s < dy.rows; ++s) {
        const Real* g = dy.row(s);
        const Real* xh = cache.xhat.row(s);
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            dg[j] += static_cast<double>(g[j]) * static_cast<double>(xh[j]);
            db[j] += static_cast<double>(g[j]);
            dxhat[j] = static_cast<double>(g[j]) * static_cast<double>(gain[j]);
            mean_dxhat += dxhat[j];
            mean_dxhat_xhat += dxhat[j] * static_cast<double>(xh[j]);
        }
        mean_dxhat /= static_cast<double>(n);
        mean_dxhat_xhat /= static_cast<double>(n);
        Real* out = dx.row(s);
        const double r = static_cast<double>(cache.rstd[s]);
        for (std::size_t j = 0; j < n; ++j) {
            out[j] = static_cast<Real>(r * (dxhat[j] - mean_dxhat - static_cast<double>(xh[j]) * mean_dxhat_xhat));
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        dgain[j] += static_cast<Real>(dg[j]);
        dbias[j] += static_cast<Real>(db[j]);
    }
    return dx;
}

// Exact (erf) GELU.
template <typename Real>
inline Real gelu(Real x) {
    return Real(0.5) * x * (Real(1) + std::erf(x * Real(std::numbers::sqrt2 / 2)));
}

template <typename Real>
inline Real gelu_grad(Real x) {
    const Real cdf = Real(0.5) * (Real(1) + std::erf(x * Real(std::numbers::sqrt2 / 2)));
    const Real pdf = std::exp(Real(-0.5) * x * x) * Real(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
    return cdf + x * pdf;
}

// Sinusoidal embedding of the normalized time: sin then cos of 1000*t*10000^(-k/n).
template <typename Real>
std::vector<Real> time_features(double t_bar, std::size_t n) {
    std::vector<Real> out(2 * n);
    for (std::size_t k = 0; k < n; ++k) {
        const double freq = std::pow(10000.0, -static_cast<double>(k) / static_cast<double>(n));
        const double a = 1000.0 * t_bar * freq;
        out[k] = static_cast<Real>(std::sin(a));
        out[n + k] = static_cast<Real>(std::cos(a));
    }
    return out;
}

}  // namespace unisync::detail
