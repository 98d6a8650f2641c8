#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trendskip/latent.hpp"
#include "trendskip/schedule.hpp"

namespace trendskip {

enum class StepAction { Real, Approx };
enum class SnapshotPolicy { HashOnly, Full };
enum class DeviationMetric { MeanAbs, Rms };

const char* step_action_name(StepAction a);
const char* snapshot_policy_name(SnapshotPolicy p);
SnapshotPolicy snapshot_policy_from_name(const std::string& name);
const char* deviation_metric_name(DeviationMetric m);
DeviationMetric deviation_metric_from_name(const std::string& name);

/// Resolved settings echoed into every trace so that artifacts are
/// self-describing and comparisons can be validated.
struct TraceConfigEcho {
    std::string policy;  // "full" | "etc" | "naive-reuse" | "residual-trend"
    double alpha = 0.5;
    int warmup = 6;  // count of extra real steps before any approximation
    double sigma = 0.0;
    std::uint64_t seed = 0;
    int condition = 0;
    SnapshotPolicy snapshots = SnapshotPolicy::HashOnly;
    DeviationMetric deviation_metric = DeviationMetric::MeanAbs;
    std::string model_spec;  // informational; "(in-memory)" when unknown
    NoiseSchedule schedule;

    friend bool operator==(const TraceConfigEcho&, const TraceConfigEcho&) = default;
};

/// One sampling step. `t` is the input timestep (T down to 1); `window` is
/// the approximation window in effect (for real steps after warmup this is
/// the post-update value driving the next burst). `latent` snapshots the
/// step's input state and `output` the model output consumed by the step;
/// both are stored only under SnapshotPolicy::Full.
struct StepRecord {
    int t = 0;
    StepAction action = StepAction::Real;
    int window = 0;
    std::optional<double> deviation;
    double trend_norm = 0.0;
    std::uint64_t output_hash = 0;
    std::optional<Latent> latent;
    std::optional<Latent> output;

    friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct RunTrace {
    TraceConfigEcho config;
    std::vector<StepRecord> steps;
    Latent final_latent;
    int nfe = 0;
    int total_steps = 0;

    friend bool operator==(const RunTrace&, const RunTrace&) = default;
};

/// JSON-lines serialization: a header object, one object per step, and a
/// trailing object with the final latent and totals. Doubles round-trip
/// bit-exactly.
std::string trace_to_jsonl(const RunTrace& trace);
RunTrace trace_from_jsonl(const std::string& text);
void save_trace(const RunTrace& trace, const std::string& path);
RunTrace load_trace(const std::string& path);

}  // namespace trendskip
