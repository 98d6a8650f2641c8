#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trendskip/policy.hpp"
#include "trendskip/schedule.hpp"
#include "trendskip/tolerance.hpp"
#include "trendskip/trace.hpp"

namespace trendskip {

/// Fully resolved experiment description. Parsed from a flat key-value text
/// with [section] headers; every key can also be forced from the command
/// line, with the flag winning.
struct ExperimentConfig {
    // [schedule]
    ScheduleKind schedule_kind = ScheduleKind::VpDdim;
    int steps = 50;  // T
    double beta_min = 1e-4;
    double beta_max = 2e-2;

    // [model]
    std::string model_spec = "builtin:std2";
    int condition = 0;                       // condition used by runs
    std::vector<int> search_conditions{0};   // conditions profiled by the search

    // [policy]
    PolicyKind policy = PolicyKind::TrendWindow;
    double alpha = 0.5;
    int warmup = 6;  // n
    std::optional<double> sigma;  // absent means "search"
    DeviationMetric deviation_metric = DeviationMetric::MeanAbs;

    // [run]
    std::vector<std::uint64_t> seeds{1};
    SnapshotPolicy snapshots = SnapshotPolicy::HashOnly;
    std::string out_dir;  // empty: resolved from env or "."
    int threads = 1;

    // [search]
    int search_seeds = 4;  // replicates per condition
    SimMetric search_metric = SimMetric::Cosine;

    // [sweep]
    std::vector<double> sweep_sigmas;
    std::vector<int> sweep_warmups;
    std::vector<double> sweep_alphas;
};

using ConfigOverride = std::pair<std::string, std::string>;  // "section.key" -> value

/// Parses, applies overrides (last one wins), fills defaults, validates.
/// Unknown sections or keys are rejected with line diagnostics.
ExperimentConfig parse_config(const std::string& text,
                              const std::vector<ConfigOverride>& overrides = {});

ExperimentConfig load_config_file(const std::string& path,
                                  const std::vector<ConfigOverride>& overrides = {});

/// Canonical emission: fixed section order, sorted keys; parse(emit(c)) == c.
std::string emit_config(const ExperimentConfig& config);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

NoiseSchedule build_schedule(const ExperimentConfig& config);

}  // namespace trendskip
