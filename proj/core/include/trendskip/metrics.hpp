#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trendskip/latent.hpp"
#include "trendskip/trace.hpp"

namespace trendskip {

/// Peak signal-to-noise ratio in dB, capped at 99 when the error underflows.
double psnr(const Latent& a, const Latent& b, double peak);

/// Global-statistics structural similarity over a whole grid (no sliding
/// window; desk-scale grids are too small for one) with the conventional
/// stabilizers C1 = (0.01 * range)^2, C2 = (0.03 * range)^2.
double ssim_grid(const Latent& a, const Latent& b, double dynamic_range);

/// Quality/efficiency summary of an accelerated run against its same-seed
/// full-sampling reference.
struct RunComparison {
    int nfe_accel = 0;
    int nfe_full = 0;
    double speedup = 0.0;  // nfe_full / nfe_accel
    double final_mse = 0.0;
    double final_psnr = 0.0;
    std::optional<double> final_ssim;  // grid latents only
    double peak = 0.0;                 // dynamic range taken from the reference
    /// L2 gap between the two trajectories at timesteps where both traces
    /// carry latent snapshots, ordered by decreasing timestep.
    std::vector<std::pair<int, double>> per_step_deviation;
};

/// Validates that the traces describe the same experiment (seed, schedule,
/// condition) and assembles the comparison.
RunComparison compare_runs(const RunTrace& trace_accel, const RunTrace& trace_full);

std::string comparison_to_json_string(const RunComparison& cmp);

}  // namespace trendskip
