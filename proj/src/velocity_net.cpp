#include "unisync/velocity_net.hpp"

#include <cmath>
#include <type_traits>

#include "net_math.hpp"

namespace unisync {

namespace {

using detail::Mat;

template <typename Real>
Mat<Real> as_mat(const std::vector<Real>& v, std::size_t rows, std::size_t cols) {
    Mat<Real> m;
    m.rows = rows;
    m.cols = cols;
    m.v = v;
    return m;
}

template <typename Real>
const Real* w(const BasicModelParams<Real>& p, std::size_t idx) {
    return p[idx].data.data();
}

template <typename Real>
Real* gw(BasicModelParams<Real>& p, std::size_t idx) {
    return p[idx].data.data();
}

void check_inputs(const Grid& z_concat, std::size_t n_t, std::span<const Conditioning> cond, const ModelConfig& cfg) {
    const Dims& d = z_concat.dims();
    if (d.c != 2 * cfg.channels || d.f != cfg.latent_frames || d.h != cfg.latent_height ||
        d.w != cfg.latent_width || d.b == 0) {
        fail(ErrorKind::InvalidDimension,
             "network input " + d.str() + " does not match model (B, " + std::to_string(2 * cfg.channels) + ", " +
                 std::to_string(cfg.latent_frames) + ", " + std::to_string(cfg.latent_height) + ", " +
                 std::to_string(cfg.latent_width) + ")");
    }
    require(n_t == d.b, ErrorKind::InvalidDimension, "one time value per batch entry required");
    require(cond.size() == d.b, ErrorKind::InvalidDimension, "one conditioning entry per batch entry required");
    for (const Conditioning& c : cond) {
        if (c.audio.s != cfg.grid_frames() || c.audio.d != cfg.dim) {
            fail(ErrorKind::InvalidDimension, "audio tokens " + std::to_string(c.audio.s) + "x" +
                                                  std::to_string(c.audio.d) + " do not match " +
                                                  std::to_string(cfg.grid_frames()) + "x" + std::to_string(cfg.dim));
        }
        if (cfg.pafs) {
            const Dims expect{1, cfg.channels, cfg.latent_frames, cfg.latent_height, cfg.latent_width};
            if (c.z_pose.dims() != expect) {
                fail(ErrorKind::InvalidDimension,
                     "pose latent " + c.z_pose.dims().str() + " does not match " + expect.str());
            }
        }
    }
}

}  // namespace

template <typename Real>
NetOutput<Real> forward(const Grid& z_concat, std::span<const double> t_bar, std::span<const Conditioning> cond,
                        const BasicModelParams<Real>& params, Mode mode) {
    const ModelConfig& cfg = params.config();
    check_inputs(z_concat, t_bar.size(), cond, cfg);
    const ParamLayout& L = params.layout();
    const Dims& zd = z_concat.dims();
    const std::size_t D = cfg.dim, H = cfg.hidden, S = cfg.tokens();
    const std::size_t row_tokens = cfg.grid_height() * cfg.grid_width();
    const detail::PatchGeom g_in{2 * cfg.channels, zd.f, zd.h, zd.w, cfg.patch_frames, cfg.patch_spatial};
    const detail::PatchGeom g_pose{cfg.channels, zd.f, zd.h, zd.w, cfg.patch_frames, cfg.patch_spatial};
    const bool train = mode == Mode::Train;

    NetOutput<Real> out;
    out.dims = Dims{zd.b, cfg.channels, zd.f, zd.h, zd.w};
    out.v.assign(out.dims.count(), Real(0));
    if (train) {
        out.trace.emplace();
        out.trace->dims = zd;
        out.trace->clips.resize(zd.b);
    }

    for (std::size_t b = 0; b < zd.b; ++b) {
        typename ForwardTrace<Real>::Clip* tc = train ? &out.trace->clips[b] : nullptr;

        Mat<Real> x = detail::im2col<Real>(z_concat.batch(b).data(), g_in);
        Mat<Real> h = detail::linear(x, w(params, L.embed_w), g_in.cols(), D, w(params, L.embed_b));

        if (cfg.pafs) {
            Mat<Real> xp = detail::im2col<Real>(cond[b].z_pose.data().data(), g_pose);
            Mat<Real> conv = detail::linear(xp, w(params, L.conv_w), g_pose.cols(), D, w(params, L.conv_b));
            Mat<Real> pre = detail::linear(conv, w(params, L.proj_w), D, D, w(params, L.proj_b));
            const Real* pe = w(params, L.pos_embed);
            for (std::size_t i = 0; i < pre.v.size(); ++i) {
                pre.v[i] += pe[i];
            }
            detail::NormCache<Real> nc;
            Mat<Real> pose = detail::layer_norm(pre, w(params, L.pose_gain), w(params, L.pose_bias), kLayerNormEps, &nc);
            for (std::size_t i = 0; i < h.v.size(); ++i) {
                h.v[i] += pose.v[i];
            }
            if (tc) {
                tc->x_pose = std::move(xp.v);
                tc->pose_conv = std::move(conv.v);
                tc->pose_xhat = std::move(nc.xhat.v);
                tc->pose_rstd = std::move(nc.rstd);
            }
        }

        const TokenSeq& audio = cond[b].audio;
        for (std::size_t s = 0; s < S; ++s) {
            const float* a = audio.row(s / row_tokens);
            Real* r = h.row(s);
            for (std::size_t j = 0; j < D; ++j) {
                r[j] += static_cast<Real>(a[j]);
            }
        }

        const auto feat = detail::time_features<Real>(t_bar[b], ModelConfig::kTimeFrequencies);
        std::vector<Real> te(D);
        for (std::size_t o = 0; o < D; ++o) {
            const Real* wr = w(params, L.time_w) + o * feat.size();
            Real acc = 0;
            for (std::size_t k = 0; k < feat.size(); ++k) {
                acc += wr[k] * feat[k];
            }
            te[o] = acc + w(params, L.time_b)[o];
        }
        for (std::size_t s = 0; s < S; ++s) {
            Real* r = h.row(s);
            for (std::size_t j = 0; j < D; ++j) {
                r[j] += te[j];
            }
        }
        if (tc) {
            tc->x_in = std::move(x.v);
            tc->time_feat = feat;
            tc->blocks.resize(cfg.blocks);
        }

        for (std::size_t l = 0; l < cfg.blocks; ++l) {
            const auto& B = L.blocks[l];
            detail::NormCache<Real> nc;
            Mat<Real> u = detail::layer_norm(h, w(params, B.norm_gain), w(params, B.norm_bias), kLayerNormEps, &nc);
            Mat<Real> a_pre = detail::linear(u, w(params, B.fc1_w), D, H, w(params, B.fc1_b));
            Mat<Real> a = a_pre;
            std::vector<Real> cdf;
            if (cfg.activation == Activation::Gelu) {
                if constexpr (std::is_same_v<Real, float>) {
                    cdf.resize(a.v.size());
                    simd::gelu(a_pre.v, a.v, cdf);
                } else {
                    for (Real& v : a.v) {
                        v = detail::gelu(v);
                    }
                }
            }
            Mat<Real> m = detail::linear(a, w(params, B.fc2_w), H, D, w(params, B.fc2_b));

            std::vector<double> csum(D, 0.0);
            for (std::size_t s = 0; s < S; ++s) {
                for (std::size_t j = 0; j < D; ++j) {
                    csum[j] += static_cast<double>(m.row(s)[j]);
                }
            }
            std::vector<Real> c(D);
            for (std::size_t j = 0; j < D; ++j) {
                c[j] = static_cast<Real>(csum[j] / static_cast<double>(S));
            }

            // o = Wc [m; c] + bc, split into the per-token half and a shared row.
            Mat<Real> o = detail::linear(m, w(params, B.ctx_w), 2 * D, D, static_cast<const Real*>(nullptr));
            std::vector<Real> shared(D);
            for (std::size_t r = 0; r < D; ++r) {
                const Real* wr = w(params, B.ctx_w) + r * 2 * D + D;
                Real acc = 0;
                for (std::size_t j = 0; j < D; ++j) {
                    acc += wr[j] * c[j];
                }
                shared[r] = acc + w(params, B.ctx_b)[r];
            }
            for (std::size_t s = 0; s < S; ++s) {
                Real* hr = h.row(s);
                const Real* orow = o.row(s);
                for (std::size_t j = 0; j < D; ++j) {
                    hr[j] += orow[j] + shared[j];
                }
            }

            if (tc) {
                auto& tb = tc->blocks[l];
                tb.xhat = std::move(nc.xhat.v);
                tb.rstd = std::move(nc.rstd);
                tb.u = std::move(u.v);
                tb.a_pre = std::move(a_pre.v);
                tb.a = std::move(a.v);
                tb.cdf = std::move(cdf);
                tb.m = std::move(m.v);
                tb.c = std::move(c);
            }
        }

        Mat<Real> y = detail::linear(h, w(params, L.head_w), D, cfg.patch_out(), w(params, L.head_b));
        const detail::PatchGeom g_out{cfg.channels, zd.f, zd.h, zd.w, cfg.patch_frames, cfg.patch_spatial};
        detail::col2im(y, out.v.data() + b * out.dims.per_batch(), g_out);
        if (tc) {
            tc->h_out = std::move(h.v);
        }
    }
    return out;
}

template <typename Real>
NetGradients<Real> backward(const NetOutput<Real>& out, std::span<const Real> d_vhat,
                            const BasicModelParams<Real>& params) {
    if (!out.trace) {
        fail(ErrorKind::State, "backward requires a train-mode forward trace");
    }
    require(d_vhat.size() == out.v.size(), ErrorKind::InvalidDimension,
            "d_vhat length " + std::to_string(d_vhat.size()) + " does not match output " +
                std::to_string(out.v.size()));
    const ModelConfig& cfg = params.config();
    const ParamLayout& L = params.layout();
    const ForwardTrace<Real>& trace = *out.trace;
    const Dims& zd = trace.dims;
    const std::size_t D = cfg.dim, H = cfg.hidden, S = cfg.tokens();
    const detail::PatchGeom g_in{2 * cfg.channels, zd.f, zd.h, zd.w, cfg.patch_frames, cfg.patch_spatial};
    const detail::PatchGeom g_pose{cfg.channels, zd.f, zd.h, zd.w, cfg.patch_frames, cfg.patch_spatial};
    const detail::PatchGeom g_out{cfg.channels, zd.f, zd.h, zd.w, cfg.patch_frames, cfg.patch_spatial};

    NetGradients<Real> grads{BasicModelParams<Real>(cfg), std::vector<Real>(zd.count(), Real(0))};
    grads.params.set_zero();
    auto& G = grads.params;

    for (std::size_t b = 0; b < zd.b; ++b) {
        const auto& tc = trace.clips[b];

        Mat<Real> dy = detail::im2col<Real>(d_vhat.data() + b * out.dims.per_batch(), g_out);
        const Mat<Real> h_out = as_mat(tc.h_out, S, D);
        detail::accumulate_weight_grad(h_out, dy, gw(G, L.head_w), D);
        detail::add_column_sums(dy, gw(G, L.head_b));
        Mat<Real> dh = detail::input_grad(dy, w(params, L.head_w), D, D);

        for (std::size_t li = cfg.blocks; li-- > 0;) {
            const auto& B = L.blocks[li];
            const auto& tb = tc.blocks[li];

            // Context projection. dh is also the gradient of the residual input.
            const Mat<Real> m = as_mat(tb.m, S, D);
            detail::accumulate_weight_grad(m, dh, gw(G, B.ctx_w), 2 * D);
            std::vector<double> sdo(D, 0.0);
            for (std::size_t s = 0; s < S; ++s) {
                for (std::size_t j = 0; j < D; ++j) {
                    sdo[j] += static_cast<double>(dh.row(s)[j]);
                }
            }
            Real* dcw = gw(G, B.ctx_w);
            Real* dcb = gw(G, B.ctx_b);
            for (std::size_t r = 0; r < D; ++r) {
                dcb[r] += static_cast<Real>(sdo[r]);
                for (std::size_t j = 0; j < D; ++j) {
                    dcw[r * 2 * D + D + j] += static_cast<Real>(sdo[r]) * tb.c[j];
                }
            }
            Mat<Real> dm = detail::input_grad(dh, w(params, B.ctx_w), 2 * D, D);
            std::vector<Real> dc_share(D);
            for (std::size_t j = 0; j < D; ++j) {
                double acc = 0.0;
                for (std::size_t r = 0; r < D; ++r) {
                    acc += sdo[r] * static_cast<double>(w(params, B.ctx_w)[r * 2 * D + D + j]);
                }
                dc_share[j] = static_cast<Real>(acc / static_cast<double>(S));
            }
            for (std::size_t s = 0; s < S; ++s) {
                Real* r = dm.row(s);
                for (std::size_t j = 0; j < D; ++j) {
                    r[j] += dc_share[j];
                }
            }

            const Mat<Real> a = as_mat(tb.a, S, H);
            detail::accumulate_weight_grad(a, dm, gw(G, B.fc2_w), H);
            detail::add_column_sums(dm, gw(G, B.fc2_b));
            Mat<Real> da = detail::input_grad(dm, w(params, B.fc2_w), H, H);
            if (cfg.activation == Activation::Gelu) {
                if constexpr (std::is_same_v<Real, float>) {
                    simd::gelu_backward(tb.a_pre, tb.cdf, da.v);
                } else {
                    for (std::size_t i = 0; i < da.v.size(); ++i) {
                        da.v[i] *= detail::gelu_grad(tb.a_pre[i]);
                    }
                }
            }

            const Mat<Real> u = as_mat(tb.u, S, D);
            detail::accumulate_weight_grad(u, da, gw(G, B.fc1_w), D);
            detail::add_column_sums(da, gw(G, B.fc1_b));
            const Mat<Real> du = detail::input_grad(da, w(params, B.fc1_w), D, D);

            detail::NormCache<Real> nc{as_mat(tb.xhat, S, D), tb.rstd};
            const Mat<Real> dln =
                detail::layer_norm_backward(du, nc, w(params, B.norm_gain), gw(G, B.norm_gain), gw(G, B.norm_bias));
            for (std::size_t i = 0; i < dh.v.size(); ++i) {
                dh.v[i] += dln.v[i];
            }
        }

        // Time embedding receives the token-summed gradient.
        std::vector<double> sdh(D, 0.0);
        for (std::size_t s = 0; s < S; ++s) {
            for (std::size_t j = 0; j < D; ++j) {
                sdh[j] += static_cast<double>(dh.row(s)[j]);
            }
        }
        const std::size_t nf = tc.time_feat.size();
        for (std::size_t o = 0; o < D; ++o) {
            gw(G, L.time_b)[o] += static_cast<Real>(sdh[o]);
            for (std::size_t k = 0; k < nf; ++k) {
                gw(G, L.time_w)[o * nf + k] += static_cast<Real>(sdh[o]) * tc.time_feat[k];
            }
        }

        if (cfg.pafs) {
            detail::NormCache<Real> nc{as_mat(tc.pose_xhat, S, D), tc.pose_rstd};
            const Mat<Real> dpre =
                detail::layer_norm_backward(dh, nc, w(params, L.pose_gain), gw(G, L.pose_gain), gw(G, L.pose_bias));
            Real* dpe = gw(G, L.pos_embed);
            for (std::size_t i = 0; i < dpre.v.size(); ++i) {
                dpe[i] += dpre.v[i];
            }
            const Mat<Real> conv = as_mat(tc.pose_conv, S, D);
            detail::accumulate_weight_grad(conv, dpre, gw(G, L.proj_w), D);
            detail::add_column_sums(dpre, gw(G, L.proj_b));
            const Mat<Real> dconv = detail::input_grad(dpre, w(params, L.proj_w), D, D);
            const Mat<Real> xp = as_mat(tc.x_pose, S, g_pose.cols());
            detail::accumulate_weight_grad(xp, dconv, gw(G, L.conv_w), g_pose.cols());
            detail::add_column_sums(dconv, gw(G, L.conv_b));
        }

        const Mat<Real> x = as_mat(tc.x_in, S, g_in.cols());
        detail::accumulate_weight_grad(x, dh, gw(G, L.embed_w), g_in.cols());
        detail::add_column_sums(dh, gw(G, L.embed_b));
        const Mat<Real> dx = detail::input_grad(dh, w(params, L.embed_w), g_in.cols(), g_in.cols());
        detail::col2im(dx, grads.d_input.data() + b * zd.per_batch(), g_in);
    }
    return grads;
}

template NetOutput<float> forward(const Grid&, std::span<const double>, std::span<const Conditioning>,
                                  const BasicModelParams<float>&, Mode);
template NetOutput<double> forward(const Grid&, std::span<const double>, std::span<const Conditioning>,
                                   const BasicModelParams<double>&, Mode);
template NetGradients<float> backward(const NetOutput<float>&, std::span<const float>, const BasicModelParams<float>&);
template NetGradients<double> backward(const NetOutput<double>&, std::span<const double>,
                                       const BasicModelParams<double>&);

Grid predict_velocity(const Grid& z_concat, std::span<const double> t_bar, std::span<const Conditioning> cond,
                      const ModelParams& params) {
    auto out = forward<float>(z_concat, t_bar, cond, params, Mode::Eval);
    return Grid(out.dims, std::move(out.v));
}

}  // namespace unisync
