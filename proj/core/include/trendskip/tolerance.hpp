#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trendskip/latent.hpp"
#include "trendskip/oracle.hpp"
#include "trendskip/schedule.hpp"

namespace trendskip {

enum class SimMetric { Cosine, OneMinusNrmse };

const char* sim_metric_name(SimMetric m);
SimMetric sim_metric_from_name(const std::string& name);

/// Output of the threshold search: per-step output-difference magnitudes L,
/// the averaged similarity curve S, the detected split, and the threshold
/// read off the mean difference curve at that split.
struct ToleranceProfile {
    std::vector<double> diff_profile;      // L, length T-1, entries >= 0
    std::vector<double> similarity_curve;  // S, length T-1, entries in [-1, 1]
    std::optional<int> change_index;
    std::optional<double> sigma;
};

/// Full-sampling pass collecting mean-abs differences between consecutive
/// model outputs; index i holds the difference between steps T-i and T-i-1.
/// Also returns the clean final latent for the perturbation scoring.
std::pair<std::vector<double>, Latent> collect_diff_profile(const OracleModel& model,
                                                            const NoiseSchedule& sched,
                                                            const Latent& x_init, int condition);

/// For each difference magnitude, perturbs the clean final latent with a
/// seeded noise direction rescaled to that magnitude and scores similarity.
/// One direction is drawn per call so the curve is monotone in the magnitude.
std::vector<double> perturb_similarity(const Latent& final_latent,
                                       const std::vector<double>& diff_profile, std::uint64_t seed,
                                       SimMetric metric = SimMetric::Cosine);

/// Single-breakpoint segmentation with piecewise-constant means and a
/// squared-error cost; returns the start index of the second segment, ties
/// broken toward the smaller index. Constant input has nothing to split.
int detect_change_point(std::span<const double> curve);

/// Runs the profile + perturbation loop over (condition, replicate) pairs,
/// averages both curves, detects the split once on the averaged similarity,
/// and reads sigma from the averaged difference curve.
ToleranceProfile search_tolerance(const OracleModel& model, const NoiseSchedule& sched,
                                  const std::vector<int>& conditions, int seeds_per_condition,
                                  std::uint64_t base_seed = 0,
                                  SimMetric metric = SimMetric::Cosine);

std::string tolerance_profile_to_json_string(const ToleranceProfile& profile);
ToleranceProfile tolerance_profile_from_json_string(const std::string& text);

}  // namespace trendskip
