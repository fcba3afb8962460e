#include "unisync/tali_sample.hpp"

#include <cmath>
#include <cstdio>

#include "unisync/latent_codec.hpp"
#include "unisync/simd/kernels.hpp"

namespace unisync {

InjectionLevel parse_injection_level(const std::string& s) {
    if (s == "current") return InjectionLevel::Current;
    if (s == "next") return InjectionLevel::Next;
    fail(ErrorKind::Config, "sampler.injection_level: unknown level '" + s + "' (expected current or next)");
}

const char* to_string(InjectionLevel l) noexcept { return l == InjectionLevel::Current ? "current" : "next"; }

void SamplerConfig::validate() const {
    if (!(tau_inj >= 0.0 && tau_inj <= 1.0)) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "sampler.tau_inj must lie in [0, 1] (got %g)", tau_inj);
        fail(ErrorKind::Config, buf);
    }
    if (steps < 1) {
        fail(ErrorKind::Config, "sampler.steps must be >= 1 (got " + std::to_string(steps) + ")");
    }
}

Grid flow_update(const Grid& z_t, const Grid& v_hat, double dt) {
    require_same_dims(z_t, v_hat, "flow_update");
    require(dt > 0.0, ErrorKind::InvalidInput, "flow_update: dt must be positive");
    Grid out(z_t.dims());
    simd::axpby(out.data(), 1.0f, z_t.data(), static_cast<float>(-dt), v_hat.data());
    return out;
}

Grid inject(const Grid& z, const Grid& z_tilde, const Grid& mask) {
    require_same_dims(z, z_tilde, "inject");
    const Dims& d = z.dims();
    const Dims& md = mask.dims();
    require(md.b == 1 && md.c == 1 && md.f == d.f && md.h == d.h && md.w == d.w, ErrorKind::InvalidDimension,
            "inject: mask must be (1, 1, f, h, w) matching the latent");
    for (float m : mask.data()) {
        require(m == 0.0f || m == 1.0f, ErrorKind::InvalidInput, "inject: mask is not binary");
    }
    Grid out(d);
    const std::size_t plane = md.per_batch();
    for (std::size_t bc = 0; bc < d.b * d.c; ++bc) {
        const std::size_t off = bc * plane;
        simd::select(out.data().subspan(off, plane), mask.data(), z.data().subspan(off, plane),
                     z_tilde.data().subspan(off, plane));
    }
    return out;
}

namespace {

// tau T, snapped to the nearest integer when within rounding of one.
double window(int steps, double tau) {
    const double x = tau * steps;
    const double r = std::round(x);
    return std::abs(x - r) < 1e-9 ? r : x;
}

}  // namespace

bool injection_gate(int t, int steps, double tau_inj) {
    // t > (1 - tau) T, written as T - t < tau T to avoid cancellation
    return static_cast<double>(steps - t) < window(steps, tau_inj);
}

std::size_t injection_count(int steps, double tau_inj) {
    std::size_t n = 0;
    for (int t = 1; t <= steps; ++t) {
        n += injection_gate(t, steps, tau_inj) ? 1 : 0;
    }
    return n;
}

SampleResult tali_sample(const Grid& z_video, const Grid& mask, const Conditioning& cond, const VelocityModel& model,
                         const SamplerConfig& cfg, const NoiseSchedule& schedule, const InjectObserver& observer) {
    cfg.validate();
    if (schedule.steps != cfg.steps) {
        fail(ErrorKind::Config, "sampler.steps (" + std::to_string(cfg.steps) + ") differs from schedule.steps (" +
                                    std::to_string(schedule.steps) + ")");
    }
    require(z_video.dims().b == 1, ErrorKind::InvalidDimension, "tali_sample expects a single clip");
    require_finite(z_video, "tali_sample z_video");

    const RngStream root(cfg.seed);
    RngStream init = root.split("init");
    const RngStream inj = root.split("inject");
    const double dt = 1.0 / cfg.steps;
    const Conditioning conds[1] = {cond};

    SampleResult res;
    Grid z = gaussian_noise(z_video.dims(), init);
    for (int t = cfg.steps; t >= 1; --t) {
        const double t_bar[1] = {schedule.normalized(t)};
        const Grid v = model.predict(concat_channels(z, z_video), t_bar, conds);
        z = flow_update(z, v, dt);
        if (injection_gate(t, cfg.steps, cfg.tau_inj)) {
            const int t_star = cfg.injection_level == InjectionLevel::Current ? t : t - 1;
            RngStream r = inj.split("step", static_cast<std::uint64_t>(t));
            const Grid z_tilde = noise_to(schedule, z_video, t_star, r);
            Grid next = inject(z, z_tilde, mask);
            if (observer) observer(t, z, next);
            z = std::move(next);
            ++res.injections;
        }
    }
    res.z0 = std::move(z);
    return res;
}

}  // namespace unisync
