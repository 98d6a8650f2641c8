#include "trendskip/experiment.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "trendskip/oracle.hpp"

namespace trendskip {

namespace fs = std::filesystem;

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path + "'");
    out << content;
    if (!out) throw Error(ErrorKind::IoError, "failed writing '" + path + "'");
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Results land in
/// index-addressed slots upstream, so completion order cannot change output.
void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
}

PolicyConfig policy_config_for(const ExperimentConfig& cfg, std::uint64_t seed, double sigma) {
    PolicyConfig pc;
    pc.alpha = cfg.alpha;
    pc.warmup = cfg.warmup;
    pc.sigma = sigma;
    pc.seed = seed;
    pc.condition = cfg.condition;
    pc.snapshots = cfg.snapshots;
    pc.deviation_metric = cfg.deviation_metric;
    pc.model_spec = cfg.model_spec;
    return pc;
}

SummaryRow row_from_comparison(std::uint64_t seed, const std::string& policy, double sigma,
                               const RunComparison& cmp) {
    SummaryRow row;
    row.seed = seed;
    row.policy = policy;
    row.sigma = sigma;
    row.nfe = cmp.nfe_accel;
    row.speedup = cmp.speedup;
    row.mse = cmp.final_mse;
    row.psnr_db = cmp.final_psnr;
    row.ssim = cmp.final_ssim;
    return row;
}

}  // namespace

std::string resolve_out_dir(const ExperimentConfig& config) {
    if (!config.out_dir.empty()) return config.out_dir;
    if (const char* env = std::getenv(kOutDirEnvVar); env && *env) return env;
    return ".";
}

ToleranceProfile searched_tolerance(const ExperimentConfig& config, bool* cache_hit) {
    if (cache_hit) *cache_hit = false;
    const NoiseSchedule sched = build_schedule(config);

    // Cache key: model content, schedule, conditions, replicate count, metric.
    std::string key = model_spec_identity_bytes(config.model_spec);
    key += "|" + schedule_to_spec(sched);
    for (int c : config.search_conditions) key += "|" + std::to_string(c);
    key += "|seeds=" + std::to_string(config.search_seeds);
    key += "|metric=" + std::string(sim_metric_name(config.search_metric));
    const std::uint64_t h = fnv1a_bytes(key.data(), key.size());
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));

    const fs::path cache_dir = fs::path(resolve_out_dir(config)) / "tolerance-cache";
    const fs::path cache_file = cache_dir / (std::string(hex) + ".json");
    if (fs::exists(cache_file)) {
        std::ifstream in(cache_file);
        std::stringstream ss;
        ss << in.rdbuf();
        ToleranceProfile cached = tolerance_profile_from_json_string(ss.str());
        if (cached.sigma) {
            if (cache_hit) *cache_hit = true;
            return cached;
        }
    }

    const auto model = model_from_spec(config.model_spec, sched);
    ToleranceProfile profile = search_tolerance(*model, sched, config.search_conditions,
                                                config.search_seeds, 0, config.search_metric);
    fs::create_directories(cache_dir);
    write_file(cache_file.string(), tolerance_profile_to_json_string(profile));
    return profile;
}

std::string summary_to_csv(const ExperimentConfig& config, const std::vector<SummaryRow>& rows,
                           bool lead_with_sigma) {
    std::ostringstream out;
    out << "# format_version=1\n";
    std::istringstream cfg(emit_config(config));
    std::string line;
    while (std::getline(cfg, line)) out << "# " << line << "\n";
    if (lead_with_sigma) out << "sigma,seed,policy,nfe,speedup,mse,psnr,ssim\n";
    else out << "seed,policy,sigma,nfe,speedup,mse,psnr,ssim\n";
    for (const SummaryRow& row : rows) {
        if (lead_with_sigma) {
            out << format_double(row.sigma) << ',' << row.seed << ',' << row.policy << ',';
        } else {
            out << row.seed << ',' << row.policy << ',' << format_double(row.sigma) << ',';
        }
        out << row.nfe << ',' << format_double(row.speedup) << ',' << format_double(row.mse) << ','
            << format_double(row.psnr_db) << ',' << (row.ssim ? format_double(*row.ssim) : "na")
            << '\n';
    }
    return out.str();
}

namespace {

struct SeedOutcome {
    RunTrace trace;
    RunComparison comparison;
};

SeedOutcome execute_seed(const ExperimentConfig& cfg, const OracleModel& model,
                         const NoiseSchedule& sched, std::uint64_t seed, double sigma,
                         PolicyKind policy, double alpha, int warmup) {
    PolicyConfig pc = policy_config_for(cfg, seed, sigma);
    pc.alpha = alpha;
    pc.warmup = warmup;
    const Latent x_init = draw_initial_latent(model, seed, cfg.condition);

    SeedOutcome outcome;
    outcome.trace = run_baseline(policy, model, sched, x_init, pc);
    if (policy == PolicyKind::Full) {
        outcome.comparison = compare_runs(outcome.trace, outcome.trace);
    } else {
        PolicyConfig full_pc = pc;
        RunTrace full = run_baseline(PolicyKind::Full, model, sched, x_init, full_pc);
        outcome.comparison = compare_runs(outcome.trace, full);
    }
    return outcome;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    const NoiseSchedule sched = build_schedule(config);
    const auto model = model_from_spec(config.model_spec, sched);

    double sigma = 0.0;
    if (config.sigma) {
        sigma = *config.sigma;
    } else {
        const ToleranceProfile profile = searched_tolerance(config);
        if (!profile.sigma) {
            throw Error(ErrorKind::DegenerateInput, "threshold search produced no sigma");
        }
        sigma = *profile.sigma;
    }
    if (config.policy != PolicyKind::Full && !(sigma > 0.0)) {
        throw Error(ErrorKind::ValidationError, "resolved sigma must be > 0");
    }

    const fs::path out_dir = resolve_out_dir(config);
    fs::create_directories(out_dir);

    ExperimentResult result;
    result.sigma_used = sigma;
    result.rows.resize(config.seeds.size());
    result.trace_paths.resize(config.seeds.size());

    std::vector<SeedOutcome> outcomes(config.seeds.size());
    parallel_for(static_cast<int>(config.seeds.size()), config.threads, [&](int i) {
        outcomes[i] = execute_seed(config, *model, sched, config.seeds[i], sigma, config.policy,
                                   config.alpha, config.warmup);
    });

    for (std::size_t i = 0; i < config.seeds.size(); ++i) {
        const std::uint64_t seed = config.seeds[i];
        const std::string stem =
            std::string(policy_kind_name(config.policy)) + "-seed" + std::to_string(seed);
        const fs::path trace_path = out_dir / (stem + ".trace.jsonl");
        save_trace(outcomes[i].trace, trace_path.string());
        write_file((out_dir / (stem + ".cmp.json")).string(),
                   comparison_to_json_string(outcomes[i].comparison));
        result.trace_paths[i] = trace_path.string();
        result.rows[i] = row_from_comparison(seed, policy_kind_name(config.policy), sigma,
                                             outcomes[i].comparison);
    }

    const fs::path summary_path = out_dir / "summary.csv";
    write_file(summary_path.string(), summary_to_csv(config, result.rows, false));
    result.summary_path = summary_path.string();
    return result;
}

std::vector<SummaryRow> sweep_sigma(const ExperimentConfig& config,
                                    const std::vector<double>& sigmas,
                                    const std::string& out_csv_path) {
    if (sigmas.empty()) throw Error(ErrorKind::ValidationError, "sigma sweep needs >= 1 value");
    const NoiseSchedule sched = build_schedule(config);
    const auto model = model_from_spec(config.model_spec, sched);

    const int jobs = static_cast<int>(sigmas.size() * config.seeds.size());
    std::vector<SummaryRow> rows(jobs);
    parallel_for(jobs, config.threads, [&](int j) {
        const std::size_t si = static_cast<std::size_t>(j) / config.seeds.size();
        const std::size_t wi = static_cast<std::size_t>(j) % config.seeds.size();
        const SeedOutcome outcome = execute_seed(config, *model, sched, config.seeds[wi],
                                                 sigmas[si], config.policy, config.alpha,
                                                 config.warmup);
        rows[j] = row_from_comparison(config.seeds[wi], policy_kind_name(config.policy),
                                      sigmas[si], outcome.comparison);
    });

    if (!out_csv_path.empty()) {
        write_file(out_csv_path, summary_to_csv(config, rows, true));
    }
    return rows;
}

std::vector<SensitivityCell> sensitivity_sweep(const ExperimentConfig& config,
                                               const std::vector<int>& warmup_grid,
                                               const std::vector<double>& alpha_grid,
                                               const std::string& out_csv_path) {
    const std::vector<int> warmups = warmup_grid.empty() ? std::vector<int>{config.warmup}
                                                         : warmup_grid;
    const std::vector<double> alphas = alpha_grid.empty() ? std::vector<double>{config.alpha}
                                                          : alpha_grid;
    const NoiseSchedule sched = build_schedule(config);
    const auto model = model_from_spec(config.model_spec, sched);

    double sigma = 0.0;
    if (config.sigma) sigma = *config.sigma;
    else {
        const ToleranceProfile profile = searched_tolerance(config);
        sigma = profile.sigma.value_or(0.0);
    }
    if (!(sigma > 0.0)) throw Error(ErrorKind::ValidationError, "resolved sigma must be > 0");

    struct Cell {
        int warmup;
        double alpha;
    };
    std::vector<Cell> cells;
    for (int n : warmups) {
        for (double a : alphas) cells.push_back({n, a});
    }

    const int jobs = static_cast<int>(cells.size() * config.seeds.size());
    std::vector<RunComparison> comparisons(jobs);
    parallel_for(jobs, config.threads, [&](int j) {
        const std::size_t ci = static_cast<std::size_t>(j) / config.seeds.size();
        const std::size_t wi = static_cast<std::size_t>(j) % config.seeds.size();
        comparisons[j] = execute_seed(config, *model, sched, config.seeds[wi], sigma,
                                      config.policy, cells[ci].alpha, cells[ci].warmup)
                             .comparison;
    });

    std::vector<SensitivityCell> out;
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        SensitivityCell cell;
        cell.warmup = cells[ci].warmup;
        cell.alpha = cells[ci].alpha;
        cell.seeds = static_cast<int>(config.seeds.size());
        double ssim_acc = 0.0;
        int ssim_count = 0;
        for (std::size_t wi = 0; wi < config.seeds.size(); ++wi) {
            const RunComparison& cmp = comparisons[ci * config.seeds.size() + wi];
            cell.mean_nfe += cmp.nfe_accel;
            cell.mean_mse += cmp.final_mse;
            if (cmp.final_ssim) {
                ssim_acc += *cmp.final_ssim;
                ++ssim_count;
            }
        }
        cell.mean_nfe /= cell.seeds;
        cell.mean_mse /= cell.seeds;
        if (ssim_count == cell.seeds && ssim_count > 0) cell.mean_ssim = ssim_acc / ssim_count;
        out.push_back(cell);
    }

    if (!out_csv_path.empty()) {
        std::ostringstream csv;
        csv << "# format_version=1\n";
        std::istringstream cfg_lines(emit_config(config));
        std::string line;
        while (std::getline(cfg_lines, line)) csv << "# " << line << "\n";
        csv << "n,alpha,seeds,mean_nfe,mean_mse,mean_ssim\n";
        for (const SensitivityCell& cell : out) {
            csv << cell.warmup << ',' << format_double(cell.alpha) << ',' << cell.seeds << ','
                << format_double(cell.mean_nfe) << ',' << format_double(cell.mean_mse) << ','
                << (cell.mean_ssim ? format_double(*cell.mean_ssim) : "na") << '\n';
        }
        write_file(out_csv_path, csv.str());
    }
    return out;
}

}  // namespace trendskip
