#pragma once

#include <optional>
#include <string>
#include <vector>

#include "trendskip/config.hpp"
#include "trendskip/metrics.hpp"
#include "trendskip/tolerance.hpp"

namespace trendskip {

/// One summary row: a policy run compared against its same-seed full
/// reference.
struct SummaryRow {
    std::uint64_t seed = 0;
    std::string policy;
    double sigma = 0.0;
    int nfe = 0;
    double speedup = 0.0;
    double mse = 0.0;
    double psnr_db = 0.0;
    std::optional<double> ssim;
};

struct ExperimentResult {
    double sigma_used = 0.0;  // resolved threshold (searched or configured)
    std::vector<SummaryRow> rows;
    std::vector<std::string> trace_paths;
    std::string summary_path;
};

/// Environment variable consulted when run.out_dir is empty.
inline constexpr const char* kOutDirEnvVar = "TRENDSKIP_OUT_DIR";

std::string resolve_out_dir(const ExperimentConfig& config);

/// Resolves sigma (running the threshold search when the config asks for it,
/// with a content-keyed cache), executes one run per seed plus a same-seed
/// full reference, writes traces, per-seed comparison JSON and a summary CSV.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Threshold sweep: one run per (sigma, seed); writes a CSV with columns
/// sigma,seed,policy,nfe,speedup,mse,psnr,ssim.
std::vector<SummaryRow> sweep_sigma(const ExperimentConfig& config,
                                    const std::vector<double>& sigmas,
                                    const std::string& out_csv_path);

struct SensitivityCell {
    int warmup = 0;
    double alpha = 0.0;
    int seeds = 0;
    double mean_nfe = 0.0;
    double mean_mse = 0.0;
    std::optional<double> mean_ssim;
};

/// Warmup/alpha grid: per-cell means over the configured seeds; writes a CSV
/// with columns n,alpha,seeds,mean_nfe,mean_mse,mean_ssim.
std::vector<SensitivityCell> sensitivity_sweep(const ExperimentConfig& config,
                                               const std::vector<int>& warmup_grid,
                                               const std::vector<double>& alpha_grid,
                                               const std::string& out_csv_path);

/// Threshold search honoring the config, cached under
/// <out_dir>/tolerance-cache keyed by the model identity bytes, schedule,
/// conditions, replicate count and metric.
ToleranceProfile searched_tolerance(const ExperimentConfig& config, bool* cache_hit = nullptr);

/// Summary CSV text for a set of rows (header comments carry the resolved
/// config and a format version); used by run_experiment and the tests.
std::string summary_to_csv(const ExperimentConfig& config, const std::vector<SummaryRow>& rows,
                           bool lead_with_sigma);

}  // namespace trendskip
