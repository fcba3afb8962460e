#include "unisync/noise_schedule.hpp"

#include <cmath>
#include <numbers>

#include "unisync/simd/kernels.hpp"

namespace unisync {

ScheduleKind parse_schedule_kind(const std::string& s) {
    if (s == "linear-flow") {
        return ScheduleKind::LinearFlow;
    }
    if (s == "variance-preserving") {
        return ScheduleKind::VariancePreserving;
    }
    fail(ErrorKind::Config, "unknown schedule kind '" + s + "'");
}

const char* to_string(ScheduleKind k) noexcept {
    return k == ScheduleKind::LinearFlow ? "linear-flow" : "variance-preserving";
}

NoiseCoeffs NoiseSchedule::eval(int t) const {
    if (steps < 1) {
        fail(ErrorKind::Range, "schedule steps must be positive");
    }
    if (t < 0 || t > steps) {
        fail(ErrorKind::Range, "timestep " + std::to_string(t) + " outside [0, " + std::to_string(steps) + "]");
    }
    // Endpoints are pinned so both kinds hit them exactly.
    if (t == 0) {
        return {1.0, 0.0};
    }
    if (t == steps) {
        return {0.0, 1.0};
    }
    const double tb = normalized(t);
    if (kind == ScheduleKind::LinearFlow) {
        return {1.0 - tb, tb};
    }
    const double angle = 0.5 * std::numbers::pi * tb;
    return {std::cos(angle), std::sin(angle)};
}

Grid mix_noise(const NoiseSchedule& s, const Grid& z_video, const Grid& eps, int t) {
    require_same_dims(z_video, eps, "mix_noise");
    const NoiseCoeffs c = s.eval(t);
    Grid out(z_video.dims());
    simd::axpby(out.data(), static_cast<float>(c.alpha), z_video.data(), static_cast<float>(c.sigma), eps.data());
    return out;
}

Grid noise_to(const NoiseSchedule& s, const Grid& z_video, int t, RngStream& rng) {
    require_finite(z_video, "noise_to input");
    s.eval(t);
    Grid eps = gaussian_noise(z_video.dims(), rng);
    return mix_noise(s, z_video, eps, t);
}

}  // namespace unisync
