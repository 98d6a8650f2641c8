#pragma once

#include <string>
#include <vector>

#include "trendskip/latent.hpp"

namespace trendskip {

enum class ScheduleKind {
    VpDdim,         // deterministic variance-preserving sampler coefficients
    RectifiedFlow,  // uniform-grid Euler stepping of a velocity field
};

const char* schedule_kind_name(ScheduleKind kind);
ScheduleKind schedule_kind_from_name(const std::string& name);

/// Per-timestep sampler coefficients.
///
/// Index conventions (timesteps run T, T-1, ..., 1 during sampling; the
/// update producing x_{t-1} from x_t reads the coefficients at t-1):
///   f[i], g[i]  with i in [0, T)   -- coefficients "at timestep i"; a step
///                                     consuming x_t uses f[t-1], g[t-1].
///   a[t], s[t]  with t in [0, T]   -- signal/noise scales at both ends of
///                                     the trajectory, hence T+1 entries.
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::VpDdim;
    int T = 0;
    std::vector<double> f;
    std::vector<double> g;
    std::vector<double> a;
    std::vector<double> s;
    // Builder echo for vp schedules; zero for flow schedules.
    double beta_min = 0.0;
    double beta_max = 0.0;

    friend bool operator==(const NoiseSchedule&, const NoiseSchedule&) = default;
};

/// Variance-preserving schedule with a linear beta ramp and deterministic
/// sampler coefficients f(t-1) = a_{t-1}/a_t, g(t-1) = a_{t-1} s_t / a_t - s_{t-1}.
/// Note f(t) = 1/sqrt(1-beta_t) sits just above 1 (by at most beta_t); the
/// bound-analysis code treats unit gains as an approximation, not a fact.
NoiseSchedule build_vp_schedule(int T, double beta_min, double beta_max);

/// Uniform-grid Euler schedule for velocity-type models: tau_t = t/T,
/// f == 1 and g == 1/T, so each step moves the latent by -v/T.
NoiseSchedule build_flow_schedule(int T);

/// One deterministic denoising step: f(t-1) * x - g(t-1) * eps, elementwise.
Latent denoise_step(const Latent& x, const Latent& eps, int t, const NoiseSchedule& sched);

/// JSON round-trip used by trace headers and debugging dumps.
std::string schedule_to_json_string(const NoiseSchedule& sched);
NoiseSchedule schedule_from_json_string(const std::string& text);

/// Compact builder-spec grammar used by the CLI and config files:
///   "vp:T=50,beta_min=1e-4,beta_max=2e-2"   or   "flow:T=50"
NoiseSchedule schedule_from_spec(const std::string& spec);
std::string schedule_to_spec(const NoiseSchedule& sched);

}  // namespace trendskip
