#include "trendskip/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "json.hpp"

namespace trendskip {

double psnr(const Latent& a, const Latent& b, double peak) {
    check_same_dim(a, b, "psnr");
    if (!(peak > 0.0)) throw Error(ErrorKind::InvalidParameter, "psnr needs peak > 0");
    const double mse = mean_squared_error(a, b);
    if (mse < 1e-12) return 99.0;
    return std::min(99.0, 10.0 * std::log10(peak * peak / mse));
}

double ssim_grid(const Latent& a, const Latent& b, double dynamic_range) {
    if (!a.shape || !b.shape) {
        throw Error(ErrorKind::InvalidParameter, "ssim needs grid-shaped latents");
    }
    if (!(*a.shape == *b.shape)) {
        throw Error(ErrorKind::DimensionMismatch, "ssim needs identical grid shapes");
    }
    check_same_dim(a, b, "ssim");
    if (!(dynamic_range > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "ssim needs dynamic_range > 0");
    }

    const double n = static_cast<double>(a.size());
    double mu_a = 0.0, mu_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        mu_a += a.values[i];
        mu_b += b.values[i];
    }
    mu_a /= n;
    mu_b /= n;

    double var_a = 0.0, var_b = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a.values[i] - mu_a;
        const double db = b.values[i] - mu_b;
        var_a += da * da;
        var_b += db * db;
        cov += da * db;
    }
    var_a /= n;
    var_b /= n;
    cov /= n;

    const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
    const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
    return ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
           ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

RunComparison compare_runs(const RunTrace& trace_accel, const RunTrace& trace_full) {
    if (trace_accel.config.seed != trace_full.config.seed ||
        trace_accel.config.condition != trace_full.config.condition ||
        !(trace_accel.config.schedule == trace_full.config.schedule)) {
        throw Error(ErrorKind::ConfigMismatch,
                    "traces differ in seed, condition or schedule; nothing to compare");
    }

    RunComparison cmp;
    cmp.nfe_accel = trace_accel.nfe;
    cmp.nfe_full = trace_full.nfe;
    cmp.speedup = static_cast<double>(trace_full.nfe) / static_cast<double>(trace_accel.nfe);
    cmp.final_mse = mean_squared_error(trace_accel.final_latent, trace_full.final_latent);

    double lo = trace_full.final_latent.values.front();
    double hi = lo;
    for (double v : trace_full.final_latent.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    cmp.peak = std::max(hi - lo, 1e-12);
    cmp.final_psnr = psnr(trace_accel.final_latent, trace_full.final_latent, cmp.peak);

    if (trace_accel.final_latent.shape && trace_full.final_latent.shape &&
        *trace_accel.final_latent.shape == *trace_full.final_latent.shape) {
        cmp.final_ssim = ssim_grid(trace_accel.final_latent, trace_full.final_latent, cmp.peak);
    }

    std::map<int, const Latent*> full_snapshots;
    for (const StepRecord& rec : trace_full.steps) {
        if (rec.latent) full_snapshots[rec.t] = &*rec.latent;
    }
    for (const StepRecord& rec : trace_accel.steps) {
        if (!rec.latent) continue;
        const auto it = full_snapshots.find(rec.t);
        if (it == full_snapshots.end()) continue;
        cmp.per_step_deviation.emplace_back(rec.t, l2_norm(sub(*rec.latent, *it->second)));
    }
    std::sort(cmp.per_step_deviation.begin(), cmp.per_step_deviation.end(),
              [](const auto& x, const auto& y) { return x.first > y.first; });
    return cmp;
}

std::string comparison_to_json_string(const RunComparison& cmp) {
    nlohmann::json j;
    j["nfe_accel"] = cmp.nfe_accel;
    j["nfe_full"] = cmp.nfe_full;
    j["speedup"] = cmp.speedup;
    j["final_mse"] = cmp.final_mse;
    j["final_psnr"] = cmp.final_psnr;
    if (cmp.final_ssim) j["final_ssim"] = *cmp.final_ssim;
    else j["final_ssim"] = nullptr;
    j["peak"] = cmp.peak;
    nlohmann::json dev = nlohmann::json::array();
    for (const auto& [t, gap] : cmp.per_step_deviation) {
        dev.push_back({{"t", t}, {"l2", gap}});
    }
    j["per_step_deviation"] = dev;
    return j.dump();
}

}  // namespace trendskip
