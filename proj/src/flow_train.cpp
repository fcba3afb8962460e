#include "unisync/flow_train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "unisync/latent_codec.hpp"
#include "unisync/simd/kernels.hpp"

namespace unisync {

namespace {

// Weighted loss and, optionally, the upstream gradient for a given prediction.
template <typename Real>
double weighted_loss(const FlowInputs& in, const std::vector<Real>& v_hat, std::vector<Real>* d_vhat) {
    const std::size_t B = in.target.dims().b;
    const std::size_t n = in.target.dims().per_batch();
    if (d_vhat) d_vhat->assign(v_hat.size(), Real(0));
    double loss = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        double sq = 0.0;
        const double scale = 2.0 * in.weight[b] / static_cast<double>(n * B);
        for (std::size_t i = b * n; i < (b + 1) * n; ++i) {
            const double diff = static_cast<double>(v_hat[i]) - static_cast<double>(in.target[i]);
            sq += diff * diff;
            if (d_vhat) (*d_vhat)[i] = static_cast<Real>(scale * diff);
        }
        loss += in.weight[b] * sq / static_cast<double>(n);
    }
    return loss / static_cast<double>(B);
}

}  // namespace

Weighting parse_weighting(const std::string& s) {
    if (s == "uniform") return Weighting::Uniform;
    if (s == "mid-weighted") return Weighting::MidWeighted;
    fail(ErrorKind::Config, "train.weighting: unknown kind '" + s + "' (expected uniform or mid-weighted)");
}

const char* to_string(Weighting w) noexcept { return w == Weighting::Uniform ? "uniform" : "mid-weighted"; }

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        fail(ErrorKind::Config, "train.learning_rate must be a finite value >= 0");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        fail(ErrorKind::Config, "train.momentum must lie in [0, 1)");
    }
    if (batch_size == 0) {
        fail(ErrorKind::Config, "train.batch_size must be positive");
    }
    if (schedule.steps < 1) {
        fail(ErrorKind::Config, "schedule.steps must be >= 1");
    }
}

Grid flow_target(const Grid& eps, const Grid& z_video) {
    require_same_dims(eps, z_video, "flow_target");
    Grid v(eps.dims());
    simd::axpby(v.data(), 1.0f, eps.data(), -1.0f, z_video.data());
    return v;
}

Grid interpolate(const Grid& z_video, const Grid& eps, int t, const NoiseSchedule& s) {
    return mix_noise(s, z_video, eps, t);
}

double loss_weight(Weighting w, int t, int steps) {
    if (w == Weighting::Uniform) {
        return 1.0;
    }
    double mean = 0.0;
    for (int k = 1; k <= steps; ++k) {
        const double tb = static_cast<double>(k) / steps;
        mean += 4.0 * tb * (1.0 - tb);
    }
    mean /= steps;
    const double tb = static_cast<double>(t) / steps;
    // T = 1 makes every weight zero; fall back to uniform rather than divide by zero.
    return mean > 0.0 ? 4.0 * tb * (1.0 - tb) / mean : 1.0;
}

std::vector<Draw> draw_noise(const std::vector<TrainClip>& batch, std::size_t step, const TrainConfig& cfg,
                             const RngStream& rng) {
    RngStream base = rng.split("noise", step);
    std::vector<Draw> draws;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        RngStream ts = base.split("t", i);
        RngStream es = base.split("eps", i);
        Draw d;
        d.t = static_cast<int>(ts.uniform_int(1, cfg.schedule.steps));
        d.eps = gaussian_noise(batch[i].z_video.dims(), es);
        draws.push_back(std::move(d));
    }
    return draws;
}

FlowInputs build_flow_inputs(const std::vector<TrainClip>& batch, const std::vector<Draw>& draws,
                             const TrainConfig& cfg) {
    require(!batch.empty(), ErrorKind::InvalidDimension, "empty training batch");
    require(draws.size() == batch.size(), ErrorKind::InvalidDimension, "one noise draw per clip required");
    FlowInputs in;
    std::vector<Grid> concat, targets;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Grid& z = batch[i].z_video;
        require(z.dims().b == 1, ErrorKind::InvalidDimension, "training clips must have B=1");
        const Grid v = flow_target(draws[i].eps, z);
        const Grid zt = cfg.literal_eq2 ? draws[i].eps : interpolate(z, draws[i].eps, draws[i].t, cfg.schedule);
        concat.push_back(concat_channels(zt, z));
        targets.push_back(v);
        in.t_bar.push_back(cfg.schedule.normalized(draws[i].t));
        in.cond.push_back(batch[i].cond);
        in.weight.push_back(loss_weight(cfg.weighting, draws[i].t, cfg.schedule.steps));
    }
    in.z_concat = stack_batch(concat);
    in.target = stack_batch(targets);
    return in;
}

double flow_loss_value(const FlowInputs& in, const Grid& v_hat) {
    require_same_dims(in.target, v_hat, "flow_loss");
    const std::size_t B = in.target.dims().b;
    const std::size_t n = in.target.dims().per_batch();
    double loss = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        double sq = 0.0;
        for (std::size_t i = b * n; i < (b + 1) * n; ++i) {
            const double d = static_cast<double>(v_hat[i]) - static_cast<double>(in.target[i]);
            sq += d * d;
        }
        loss += in.weight[b] * sq / static_cast<double>(n);
    }
    return loss / static_cast<double>(B);
}

LossAndGrad flow_loss(const ModelParams& params, const FlowInputs& in) {
    auto out = forward<float>(in.z_concat, in.t_bar, in.cond, params, Mode::Train);
    std::vector<float> d;
    LossAndGrad r;
    r.loss = weighted_loss(in, out.v, &d);
    r.grads = std::move(backward<float>(out, d, params).params);
    return r;
}

void sgd_momentum_update(ModelParams& params, ModelParams& velocity, const ModelParams& grads, double lr, double mu) {
    const auto lr_f = static_cast<float>(lr);
    const auto mu_f = static_cast<float>(mu);
    for (std::size_t t = 0; t < params.tensors().size(); ++t) {
        auto& p = params[t].data;
        auto& v = velocity[t].data;
        const auto& g = grads[t].data;
        for (std::size_t i = 0; i < p.size(); ++i) {
            v[i] = mu_f * v[i] + g[i];
            p[i] = p[i] - lr_f * v[i];
        }
    }
}

double grad_norm(const ModelParams& grads) {
    double acc = 0.0;
    for (const auto& t : grads.tensors()) {
        for (float g : t.data) {
            acc += static_cast<double>(g) * g;
        }
    }
    return std::sqrt(acc);
}

TrainState::TrainState(ModelParams p) : params(std::move(p)), velocity(params.config()) { velocity.set_zero(); }

StepResult train_step(TrainState& state, const std::vector<TrainClip>& batch, const TrainConfig& cfg,
                      const RngStream& rng) {
    const auto draws = draw_noise(batch, state.step, cfg, rng);
    const FlowInputs in = build_flow_inputs(batch, draws, cfg);
    LossAndGrad lg = flow_loss(state.params, in);
    const double gn = grad_norm(lg.grads);
    if (!std::isfinite(lg.loss) || !std::isfinite(gn)) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "training diverged at step %zu (loss %g)", state.step, lg.loss);
        fail(ErrorKind::Diverged, buf);
    }
    sgd_momentum_update(state.params, state.velocity, lg.grads, cfg.learning_rate, cfg.momentum);
    ++state.step;
    return {lg.loss, gn};
}

std::vector<TrainLogRow> train(TrainState& state, const std::vector<TrainClip>& corpus, const TrainConfig& cfg,
                               const std::filesystem::path& out_dir,
                               const std::function<void(const TrainLogRow&)>& on_step) {
    cfg.validate();
    require(!corpus.empty(), ErrorKind::InvalidInput, "training corpus is empty");
    const RngStream root(cfg.seed);
    const RngStream noise = root.split("train");
    std::ofstream log;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        log.open(out_dir / "train_log.csv");
        if (!log) {
            fail(ErrorKind::Io, "cannot write " + (out_dir / "train_log.csv").string());
        }
        log << "step,loss,grad_norm\n";
    }
    std::vector<TrainLogRow> rows;
    for (std::size_t i = 0; i < cfg.steps; ++i) {
        RngStream pick = root.split("batch", state.step);
        std::vector<TrainClip> batch;
        for (std::size_t k = 0; k < cfg.batch_size; ++k) {
            batch.push_back(corpus[static_cast<std::size_t>(pick.uniform_int(0, static_cast<std::int64_t>(corpus.size()) - 1))]);
        }
        const std::size_t step = state.step;
        const StepResult r = train_step(state, batch, cfg, noise);
        const TrainLogRow row{step, r.loss, r.grad_norm};
        rows.push_back(row);
        if (log) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", row.step, row.loss, row.grad_norm);
            log << buf;
        }
        if (on_step) {
            on_step(row);
        }
        if (!out_dir.empty() && cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0) {
            char name[64];
            std::snprintf(name, sizeof name, "checkpoint_%06zu.unis", state.step);
            save_checkpoint(state.params, out_dir / name);
        }
    }
    if (!out_dir.empty()) {
        save_checkpoint(state.params, out_dir / "model.unis");
    }
    return rows;
}


GradCheckReport grad_check(const ModelParams& params, const std::vector<TrainClip>& micro_batch,
                           const TrainConfig& cfg, std::size_t probes_per_group, std::uint64_t seed,
                           double fd_step) {
    GradCheckReport report;
    if (probes_per_group == 0) {
        return report;
    }
    const RngStream root(seed);
    const auto draws = draw_noise(micro_batch, 0, cfg, root.split("gradcheck-noise"));
    const FlowInputs in = build_flow_inputs(micro_batch, draws, cfg);

    // Analytic gradients from the same backward code instantiated in double, at
    // the float parameter values; the float instantiation is compared separately.
    auto pd = params.cast<double>();
    const auto out_d = forward<double>(in.z_concat, in.t_bar, in.cond, pd, Mode::Train);
    std::vector<double> dv;
    weighted_loss(in, out_d.v, &dv);
    const auto analytic = backward<double>(out_d, dv, pd).params;
    const LossAndGrad float_path = flow_loss(params, in);

    auto loss_at = [&](const BasicModelParams<double>& p) {
        const auto o = forward<double>(in.z_concat, in.t_bar, in.cond, p, Mode::Eval);
        return weighted_loss<double>(in, o.v, nullptr);
    };
    auto rel_err = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); };

    require(fd_step > 0.0, ErrorKind::Config, "gradcheck.step must be positive");
    const double h = fd_step;
    for (std::size_t ti = 0; ti < pd.tensors().size(); ++ti) {
        auto& tensor = pd[ti];
        const std::size_t n = tensor.data.size();
        std::vector<std::size_t> coords;
        if (n <= probes_per_group) {
            for (std::size_t k = 0; k < n; ++k) coords.push_back(k);
        } else {
            RngStream pick = root.split("probe", ti);
            for (std::size_t k = 0; k < probes_per_group; ++k) {
                coords.push_back(static_cast<std::size_t>(pick.uniform_int(0, static_cast<std::int64_t>(n) - 1)));
            }
        }
        for (std::size_t k : coords) {
            const double orig = tensor.data[k];
            tensor.data[k] = orig + h;
            const double lp = loss_at(pd);
            tensor.data[k] = orig - h;
            const double lm = loss_at(pd);
            tensor.data[k] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double rel = rel_err(analytic[ti].data[k], fd);
            ++report.probes;
            if (rel > report.max_rel_err || report.worst_tensor.empty()) {
                report.max_rel_err = rel;
                report.worst_tensor = tensor.name;
                report.worst_analytic = analytic[ti].data[k];
                report.worst_numeric = fd;
            }
            report.float_path_max_rel =
                std::max(report.float_path_max_rel, rel_err(float_path.grads[ti].data[k], analytic[ti].data[k]));
        }
    }
    return report;
}

std::vector<TrainClip> synthetic_micro_batch(const ModelConfig& config, std::size_t clips, std::uint64_t seed) {
    const RngStream root(seed);
    const Dims d{1, config.channels, config.latent_frames, config.latent_height, config.latent_width};
    std::vector<TrainClip> out;
    for (std::size_t i = 0; i < clips; ++i) {
        RngStream r = root.split("clip", i);
        TrainClip c;
        c.z_video = Grid(d);
        for (float& v : c.z_video.data()) v = static_cast<float>(r.uniform());
        c.cond.z_pose = Grid(d);
        for (float& v : c.cond.z_pose.data()) v = static_cast<float>(r.uniform() < 0.1 ? 1.0 : 0.0);
        std::vector<float> sig(config.latent_frames);
        for (float& v : sig) v = static_cast<float>(r.uniform());
        c.cond.audio = embed_audio(sig, config.grid_frames(), config.dim);
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace unisync
