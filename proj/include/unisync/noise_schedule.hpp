#pragma once

#include <string>

#include "unisync/grid.hpp"
#include "unisync/rng.hpp"

namespace unisync {

enum class ScheduleKind { LinearFlow, VariancePreserving };

ScheduleKind parse_schedule_kind(const std::string& s);
const char* to_string(ScheduleKind k) noexcept;

struct NoiseCoeffs {
    double alpha;
    double sigma;
};

/// t runs over the integers 0..steps; t = steps is pure noise, t = 0 is clean data.
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::LinearFlow;
    int steps = 50;

    double normalized(int t) const noexcept { return static_cast<double>(t) / steps; }
    /// linear-flow: (1 - t/T, t/T); variance-preserving: (cos(pi t/2T), sin(pi t/2T)).
    NoiseCoeffs eval(int t) const;
};

/// alpha_t * z_video + sigma_t * eps' with fresh eps' drawn from `rng`.
Grid noise_to(const NoiseSchedule& s, const Grid& z_video, int t, RngStream& rng);
/// Same combination with caller-supplied noise.
Grid mix_noise(const NoiseSchedule& s, const Grid& z_video, const Grid& eps, int t);

}  // namespace unisync
