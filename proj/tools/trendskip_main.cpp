// Command-line front end: experiment runs, threshold sweeps, tolerance
// search, trace analysis and comparisons — everything file-driven and
// reproducible from (config, seeds).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "trendskip/config.hpp"
#include "trendskip/error_analysis.hpp"
#include "trendskip/experiment.hpp"
#include "trendskip/metrics.hpp"
#include "trendskip/oracle.hpp"
#include "trendskip/policy.hpp"
#include "trendskip/tolerance.hpp"

namespace fs = std::filesystem;
using namespace trendskip;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitPartial = 3;

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::ParseError:
        case ErrorKind::ValidationError:
        case ErrorKind::InvalidParameter:
            return kExitValidation;
        default:
            return kExitRuntime;
    }
}

std::size_t count_dir_entries(const std::string& dir) {
    std::error_code ec;
    if (!fs::exists(dir, ec)) return 0;
    std::size_t n = 0;
    for (auto it = fs::recursive_directory_iterator(dir, ec);
         it != fs::recursive_directory_iterator(); it.increment(ec)) {
        ++n;
    }
    return n;
}

struct CommonRunFlags {
    std::string config_path;
    std::vector<std::string> sets;
    std::string policy;
    std::string sigma;
    std::string alpha;
    std::string warmup;
    std::string seeds;
    std::string out_dir;
    std::string snapshots;
    std::string threads;
};

void add_common_run_flags(CLI::App* cmd, CommonRunFlags& flags) {
    cmd->add_option("--config", flags.config_path, "Config file (key = value with [section] headers)");
    cmd->add_option("--set", flags.sets, "Override any key: --set section.key=value")
        ->take_all();
    cmd->add_option("--policy", flags.policy, "policy.name shorthand");
    cmd->add_option("--sigma", flags.sigma, "policy.sigma shorthand (number or 'search')");
    cmd->add_option("--alpha", flags.alpha, "policy.alpha shorthand");
    cmd->add_option("--n", flags.warmup, "policy.n shorthand");
    cmd->add_option("--seeds", flags.seeds, "run.seeds shorthand (comma-separated)");
    cmd->add_option("--out", flags.out_dir, "run.out_dir shorthand");
    cmd->add_option("--snapshots", flags.snapshots, "run.snapshots shorthand (hash|full)");
    cmd->add_option("--threads", flags.threads, "run.threads shorthand");
}

ExperimentConfig resolve_config(const CommonRunFlags& flags) {
    std::vector<ConfigOverride> overrides;
    for (const std::string& item : flags.sets) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::ParseError, "--set expects section.key=value, got '" + item + "'");
        }
        overrides.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
    if (!flags.policy.empty()) overrides.emplace_back("policy.name", flags.policy);
    if (!flags.sigma.empty()) overrides.emplace_back("policy.sigma", flags.sigma);
    if (!flags.alpha.empty()) overrides.emplace_back("policy.alpha", flags.alpha);
    if (!flags.warmup.empty()) overrides.emplace_back("policy.n", flags.warmup);
    if (!flags.seeds.empty()) overrides.emplace_back("run.seeds", flags.seeds);
    if (!flags.out_dir.empty()) overrides.emplace_back("run.out_dir", flags.out_dir);
    if (!flags.snapshots.empty()) overrides.emplace_back("run.snapshots", flags.snapshots);
    if (!flags.threads.empty()) overrides.emplace_back("run.threads", flags.threads);

    if (flags.config_path.empty()) return parse_config("", overrides);
    return load_config_file(flags.config_path, overrides);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path + "'");
    out << content;
}

int cmd_run(const CommonRunFlags& flags) {
    const ExperimentConfig config = resolve_config(flags);
    const std::string out_dir = resolve_out_dir(config);
    const std::size_t before = count_dir_entries(out_dir);
    try {
        const ExperimentResult result = run_experiment(config);
        std::cout << "sigma=" << result.sigma_used << " runs=" << result.rows.size()
                  << " summary=" << result.summary_path << "\n";
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (count_dir_entries(out_dir) > before) {
            std::cerr << "partial outputs were written to " << out_dir << "\n";
            return kExitPartial;
        }
        return exit_code_for(e);
    }
}

int cmd_sweep(const CommonRunFlags& flags, const std::string& out_csv) {
    const ExperimentConfig config = resolve_config(flags);
    const std::string out_dir = resolve_out_dir(config);
    fs::create_directories(out_dir);
    const bool sigma_mode = !config.sweep_sigmas.empty();
    const bool grid_mode = !config.sweep_warmups.empty() || !config.sweep_alphas.empty();
    if (!sigma_mode && !grid_mode) {
        throw Error(ErrorKind::ValidationError,
                    "sweep needs sweep.sigmas and/or sweep.n_grid / sweep.alpha_grid");
    }
    const std::size_t before = count_dir_entries(out_dir);
    try {
        if (sigma_mode) {
            const std::string path =
                out_csv.empty() ? (fs::path(out_dir) / "sweep.csv").string() : out_csv;
            const auto rows = sweep_sigma(config, config.sweep_sigmas, path);
            std::cout << "sweep rows=" << rows.size() << " csv=" << path << "\n";
        }
        if (grid_mode) {
            const std::string path = out_csv.empty() || sigma_mode
                                         ? (fs::path(out_dir) / "sensitivity.csv").string()
                                         : out_csv;
            const auto cells =
                sensitivity_sweep(config, config.sweep_warmups, config.sweep_alphas, path);
            std::cout << "sensitivity cells=" << cells.size() << " csv=" << path << "\n";
        }
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (count_dir_entries(out_dir) > before) return kExitPartial;
        return exit_code_for(e);
    }
}

int cmd_search_tolerance(const std::string& model_spec, const std::string& schedule_spec,
                         int conditions, int seeds, const std::string& metric,
                         const std::string& out_path) {
    const NoiseSchedule sched = schedule_from_spec(schedule_spec);
    const auto model = model_from_spec(model_spec, sched);
    std::vector<int> condition_ids(conditions);
    for (int i = 0; i < conditions; ++i) condition_ids[i] = i;
    const ToleranceProfile profile = search_tolerance(
        *model, sched, condition_ids, seeds, 0, sim_metric_from_name(metric));
    write_file(out_path, tolerance_profile_to_json_string(profile));
    std::cout << "sigma=" << (profile.sigma ? *profile.sigma : 0.0)
              << " change_index=" << (profile.change_index ? *profile.change_index : -1)
              << " out=" << out_path << "\n";
    return kExitOk;
}

int cmd_analyze_trace(const std::string& in_path, const std::string& model_spec,
                      const std::string& out_path) {
    const RunTrace trace = load_trace(in_path);
    const NoiseSchedule& sched = trace.config.schedule;
    const auto model = model_from_spec(model_spec, sched);
    const BoundReport report = bound_report(trace, *model, sched);
    write_file(out_path, bound_report_to_csv(report));
    int violations = 0;
    for (const BoundRow& row : report.rows) violations += row.violated ? 1 : 0;
    std::cout << "rounds=" << report.rows.size() << " violations=" << violations
              << " out=" << out_path << "\n";
    return kExitOk;
}

int cmd_compare(const std::string& accel_path, const std::string& ref_path,
                const std::string& out_path) {
    const RunTrace accel = load_trace(accel_path);
    const RunTrace ref = load_trace(ref_path);
    const RunComparison cmp = compare_runs(accel, ref);
    write_file(out_path, comparison_to_json_string(cmp));
    std::cout << "speedup=" << cmp.speedup << " mse=" << cmp.final_mse << " out=" << out_path
              << "\n";
    return kExitOk;
}

int cmd_record_trace(const std::string& model_spec, const std::string& schedule_spec,
                     std::uint64_t seed, int condition, const std::string& out_path) {
    const NoiseSchedule sched = schedule_from_spec(schedule_spec);
    const auto model = model_from_spec(model_spec, sched);
    PolicyConfig pc;
    pc.seed = seed;
    pc.condition = condition;
    pc.snapshots = SnapshotPolicy::Full;
    pc.model_spec = model_spec;
    const Latent x_init = draw_initial_latent(*model, seed, condition);
    const RunTrace trace = run_baseline(PolicyKind::Full, *model, sched, x_init, pc);
    save_trace(trace, out_path);
    std::cout << "steps=" << trace.total_steps << " nfe=" << trace.nfe << " out=" << out_path
              << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trendskip: adaptive output-reuse sampling simulator with analytic oracles"};
    app.require_subcommand(1);

    CommonRunFlags run_flags;
    CLI::App* run = app.add_subcommand("run", "Run a policy over seeds and compare to full sampling");
    add_common_run_flags(run, run_flags);

    CommonRunFlags sweep_flags;
    std::string sweep_out;
    CLI::App* sweep = app.add_subcommand("sweep", "Threshold and/or n-alpha sensitivity sweeps");
    add_common_run_flags(sweep, sweep_flags);
    sweep->add_option("--out-csv", sweep_out, "Explicit CSV output path");

    std::string st_model = "builtin:std2";
    std::string st_schedule = "vp:T=50,beta_min=1e-4,beta_max=2e-2";
    int st_conditions = 1;
    int st_seeds = 4;
    std::string st_metric = "cosine";
    std::string st_out = "profile.json";
    CLI::App* st = app.add_subcommand("search-tolerance", "Profile a model and detect its threshold");
    st->add_option("--model", st_model, "Model spec (builtin:NAME | gmm:PATH | trace:PATH)");
    st->add_option("--schedule", st_schedule, "Schedule spec (vp:T=..,beta_min=..,beta_max=.. | flow:T=..)");
    st->add_option("--conditions", st_conditions, "Number of condition ids (0..N-1)");
    st->add_option("--seeds", st_seeds, "Replicates per condition");
    st->add_option("--metric", st_metric, "Similarity metric (cosine | one-minus-nrmse)");
    st->add_option("--out", st_out, "Output profile JSON");

    std::string at_in, at_model = "builtin:std2", at_out = "bounds.csv";
    CLI::App* at = app.add_subcommand("analyze-trace", "Ghost-replay a trace and report error bounds");
    at->add_option("--in", at_in, "Input trace (recorded with snapshots=full)")->required();
    at->add_option("--model", at_model, "Model spec used for ghost replays");
    at->add_option("--out", at_out, "Output CSV");

    std::string cm_accel, cm_ref, cm_out = "cmp.json";
    CLI::App* cm = app.add_subcommand("compare", "Compare an accelerated trace to a reference trace");
    cm->add_option("--accel", cm_accel, "Accelerated run trace")->required();
    cm->add_option("--ref", cm_ref, "Reference (full) run trace")->required();
    cm->add_option("--out", cm_out, "Output JSON");

    std::string rt_model = "builtin:std2";
    std::string rt_schedule = "vp:T=50,beta_min=1e-4,beta_max=2e-2";
    std::uint64_t rt_seed = 1;
    int rt_condition = 0;
    std::string rt_out = "recorded.trace.jsonl";
    CLI::App* rt = app.add_subcommand("record-trace", "Record a full-sampling trace for playback");
    rt->add_option("--model", rt_model, "Model spec");
    rt->add_option("--schedule", rt_schedule, "Schedule spec");
    rt->add_option("--seed", rt_seed, "Seed for the initial latent");
    rt->add_option("--condition", rt_condition, "Condition id");
    rt->add_option("--out", rt_out, "Output trace path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_flags);
        if (sweep->parsed()) return cmd_sweep(sweep_flags, sweep_out);
        if (st->parsed()) {
            return cmd_search_tolerance(st_model, st_schedule, st_conditions, st_seeds, st_metric,
                                        st_out);
        }
        if (at->parsed()) return cmd_analyze_trace(at_in, at_model, at_out);
        if (cm->parsed()) return cmd_compare(cm_accel, cm_ref, cm_out);
        if (rt->parsed()) return cmd_record_trace(rt_model, rt_schedule, rt_seed, rt_condition, rt_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitValidation;
}
