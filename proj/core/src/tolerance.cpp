#include "trendskip/tolerance.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "trendskip/rng.hpp"

namespace trendskip {

const char* sim_metric_name(SimMetric m) {
    return m == SimMetric::Cosine ? "cosine" : "one-minus-nrmse";
}

SimMetric sim_metric_from_name(const std::string& name) {
    if (name == "cosine") return SimMetric::Cosine;
    if (name == "one-minus-nrmse") return SimMetric::OneMinusNrmse;
    throw Error(ErrorKind::ParseError, "unknown similarity metric '" + name + "'");
}

std::pair<std::vector<double>, Latent> collect_diff_profile(const OracleModel& model,
                                                            const NoiseSchedule& sched,
                                                            const Latent& x_init, int condition) {
    if (x_init.size() != model.dim()) {
        throw Error(ErrorKind::DimensionMismatch, "initial latent does not match model dimension");
    }
    std::vector<double> profile;
    profile.reserve(sched.T - 1);
    Latent x = x_init;
    std::optional<Latent> prev;
    for (int t = sched.T; t >= 1; --t) {
        Latent eps = model.evaluate(x, t, condition);
        if (prev) profile.push_back(mean_abs(sub(eps, *prev)));
        x = denoise_step(x, eps, t, sched);
        prev = std::move(eps);
    }
    return {std::move(profile), std::move(x)};
}

namespace {

double similarity(const Latent& clean, const Latent& perturbed, SimMetric metric) {
    switch (metric) {
        case SimMetric::Cosine: {
            const double nc = l2_norm(clean);
            const double np = l2_norm(perturbed);
            if (nc == 0.0 || np == 0.0) return nc == np ? 1.0 : 0.0;
            return std::clamp(dot(clean, perturbed) / (nc * np), -1.0, 1.0);
        }
        case SimMetric::OneMinusNrmse: {
            double lo = clean.values.front(), hi = clean.values.front();
            for (double v : clean.values) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            const double range = std::max(hi - lo, 1e-12);
            const double rmse = std::sqrt(mean_squared_error(clean, perturbed));
            return std::clamp(1.0 - rmse / range, -1.0, 1.0);
        }
    }
    return 0.0;
}

}  // namespace

std::vector<double> perturb_similarity(const Latent& final_latent,
                                       const std::vector<double>& diff_profile, std::uint64_t seed,
                                       SimMetric metric) {
    for (double v : diff_profile) {
        if (!(v >= 0.0)) {
            throw Error(ErrorKind::InvalidParameter, "difference magnitudes must be >= 0");
        }
    }
    // One noise direction per call, rescaled per entry.
    Rng rng(mix_seed(seed, 0x73696d696c61ull));
    Latent direction = rng.standard_normal(final_latent.size());
    const double dir_scale = mean_abs(direction);
    if (dir_scale == 0.0) throw Error(ErrorKind::NumericError, "degenerate noise draw");

    std::vector<double> scores;
    scores.reserve(diff_profile.size());
    for (double magnitude : diff_profile) {
        Latent perturbed = final_latent;
        axpy(perturbed, magnitude / dir_scale, direction);
        scores.push_back(similarity(final_latent, perturbed, metric));
    }
    return scores;
}

int detect_change_point(std::span<const double> curve) {
    const std::size_t n = curve.size();
    if (n < 4) throw Error(ErrorKind::InvalidParameter, "need at least 4 points to split");

    bool constant = true;
    for (std::size_t i = 1; i < n; ++i) constant = constant && curve[i] == curve[0];
    if (constant) {
        throw Error(ErrorKind::DegenerateInput, "curve is constant; no variance to split");
    }

    // Prefix sums make each split's squared error O(1):
    // sse = sum(x^2) - (sum x)^2 / count.
    std::vector<double> sum(n + 1, 0.0), sumsq(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        sum[i + 1] = sum[i] + curve[i];
        sumsq[i + 1] = sumsq[i] + curve[i] * curve[i];
    }
    auto sse = [&](std::size_t lo, std::size_t hi) {  // [lo, hi)
        const double s = sum[hi] - sum[lo];
        const double q = sumsq[hi] - sumsq[lo];
        const double cnt = static_cast<double>(hi - lo);
        return q - s * s / cnt;
    };

    std::size_t best = 1;
    double best_cost = sse(0, 1) + sse(1, n);
    for (std::size_t b = 2; b < n; ++b) {
        const double cost = sse(0, b) + sse(b, n);
        if (cost < best_cost) {
            best_cost = cost;
            best = b;
        }
    }
    return static_cast<int>(best);
}

ToleranceProfile search_tolerance(const OracleModel& model, const NoiseSchedule& sched,
                                  const std::vector<int>& conditions, int seeds_per_condition,
                                  std::uint64_t base_seed, SimMetric metric) {
    if (conditions.empty()) {
        throw Error(ErrorKind::InvalidParameter, "tolerance search needs >= 1 condition");
    }
    if (seeds_per_condition < 1) {
        throw Error(ErrorKind::InvalidParameter, "tolerance search needs >= 1 seed per condition");
    }

    const std::size_t len = static_cast<std::size_t>(sched.T - 1);
    std::vector<double> sum_diff(len, 0.0), sum_sim(len, 0.0);
    int runs = 0;

    for (int condition : conditions) {
        for (int rep = 0; rep < seeds_per_condition; ++rep) {
            const std::uint64_t seed =
                mix_seed(base_seed, (static_cast<std::uint64_t>(condition) << 20) +
                                        static_cast<std::uint64_t>(rep));
            Rng rng(mix_seed(seed, 0x746f6c2d696e6974ull));
            const Latent x_init = rng.standard_normal(model.dim(), model.latent_shape());

            auto [profile, final_latent] = collect_diff_profile(model, sched, x_init, condition);
            const std::vector<double> scores =
                perturb_similarity(final_latent, profile, seed, metric);
            for (std::size_t i = 0; i < len; ++i) {
                sum_diff[i] += profile[i];
                sum_sim[i] += scores[i];
            }
            ++runs;
        }
    }

    ToleranceProfile out;
    out.diff_profile.resize(len);
    out.similarity_curve.resize(len);
    for (std::size_t i = 0; i < len; ++i) {
        out.diff_profile[i] = sum_diff[i] / runs;
        out.similarity_curve[i] = sum_sim[i] / runs;
    }
    const int idx = detect_change_point(out.similarity_curve);
    out.change_index = idx;
    out.sigma = out.diff_profile[idx];
    return out;
}

std::string tolerance_profile_to_json_string(const ToleranceProfile& profile) {
    nlohmann::json j;
    j["L"] = profile.diff_profile;
    j["S"] = profile.similarity_curve;
    if (profile.change_index) j["change_index"] = *profile.change_index;
    else j["change_index"] = nullptr;
    if (profile.sigma) j["sigma"] = *profile.sigma;
    else j["sigma"] = nullptr;
    return j.dump();
}

ToleranceProfile tolerance_profile_from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("tolerance profile json: ") + e.what());
    }
    ToleranceProfile out;
    try {
        out.diff_profile = j.at("L").get<std::vector<double>>();
        out.similarity_curve = j.at("S").get<std::vector<double>>();
        if (!j.at("change_index").is_null()) out.change_index = j.at("change_index").get<int>();
        if (!j.at("sigma").is_null()) out.sigma = j.at("sigma").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("tolerance profile json: ") + e.what());
    }
    return out;
}

}  // namespace trendskip
