#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "unisync/grid.hpp"
#include "unisync/noise_schedule.hpp"
#include "unisync/velocity_net.hpp"

namespace unisync {

/// Noise level written by an injection at step t: t itself, or the level t-1 the
/// latent is about to hold.
enum class InjectionLevel { Current, Next };

InjectionLevel parse_injection_level(const std::string& s);
const char* to_string(InjectionLevel l) noexcept;

struct SamplerConfig {
    double tau_inj = 0.8;
    int steps = 50;
    InjectionLevel injection_level = InjectionLevel::Current;
    std::uint64_t seed = 0;

    void validate() const;
};

/// z - dt * v_hat
Grid flow_update(const Grid& z_t, const Grid& v_hat, double dt);

/// mask ? z : z_tilde, with a (1, 1, f, h, w) binary mask broadcast over batch and channels.
/// Throws InvalidInput on a non-binary mask.
Grid inject(const Grid& z, const Grid& z_tilde, const Grid& mask);

/// True when step t (counting down from T) is inside the injection window t > (1 - tau) T.
bool injection_gate(int t, int steps, double tau_inj);
/// Number of steps in 1..T for which the gate is open.
std::size_t injection_count(int steps, double tau_inj);

struct SampleResult {
    Grid z0;
    std::size_t injections = 0;
};

/// Called after each injection with the latent before and after it.
using InjectObserver = std::function<void(int t, const Grid& before, const Grid& after)>;

/// Euler flow sampling from z_T ~ N(0, I) conditioned on z_video, with masked
/// re-injection of the noised ground truth outside the mask during the first
/// tau_inj fraction of steps. Deterministic given cfg.seed.
SampleResult tali_sample(const Grid& z_video, const Grid& mask, const Conditioning& cond, const VelocityModel& model,
                         const SamplerConfig& cfg, const NoiseSchedule& schedule,
                         const InjectObserver& observer = {});

}  // namespace unisync
