#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "trendskip/latent.hpp"
#include "trendskip/oracle.hpp"
#include "trendskip/schedule.hpp"
#include "trendskip/trace.hpp"

namespace trendskip {

enum class PolicyKind { Full, TrendWindow, NaiveReuse, ResidualTrend };

const char* policy_kind_name(PolicyKind p);
PolicyKind policy_kind_from_name(const std::string& name);

struct PolicyConfig {
    double alpha = 0.5;          // trend smoothing coefficient, in (0, 1]
    int warmup = 6;              // extra real steps before the first burst (n)
    double sigma = 0.1;          // deviation threshold driving the window
    std::uint64_t seed = 0;      // echoed into the trace
    int condition = 0;
    SnapshotPolicy snapshots = SnapshotPolicy::HashOnly;
    DeviationMetric deviation_metric = DeviationMetric::MeanAbs;
    std::string model_spec = "(in-memory)";
};

/// Exponentially weighted trend update. Without a previous estimate the
/// update just adopts the new difference.
Latent ema_update(const std::optional<Latent>& delta_prev, const Latent& d, double alpha);

/// Output extrapolated s steps into a window of k: base + (s/k) * delta.
Latent approx_output(const Latent& base, const Latent& delta, int k, int s);

/// Scalar gap between a fresh real output and the extrapolated one,
/// mean(|eps - last - delta|) by default.
double deviation(const Latent& eps_real, const Latent& last, const Latent& delta,
                 DeviationMetric metric = DeviationMetric::MeanAbs);

/// Window controller: grow by one while the deviation stays below sigma,
/// shrink by one otherwise; clamped to [0, remaining_steps - 1] so the run
/// always ends on a real inference.
int window_update(int k, double dev, double sigma, int remaining_steps);

/// Full adaptive-window sampling run: n+1 real warmup steps, then rounds of
/// k extrapolated steps followed by one real step that refreshes the trend
/// and the window, and a final real step.
RunTrace run_etc(const OracleModel& model, const NoiseSchedule& sched, const Latent& x_init,
                 const PolicyConfig& config);

/// Comparison policies sharing the same loop: `Full` evaluates the model at
/// every step; `NaiveReuse` repeats the last output across a burst;
/// `ResidualTrend` applies the raw last residual in full at every burst step.
RunTrace run_baseline(PolicyKind policy, const OracleModel& model, const NoiseSchedule& sched,
                      const Latent& x_init, const PolicyConfig& config);

/// Initial latent for a (seed, condition) pair: standard normal with the
/// model's grid annotation.
Latent draw_initial_latent(const OracleModel& model, std::uint64_t seed, int condition);

}  // namespace trendskip
