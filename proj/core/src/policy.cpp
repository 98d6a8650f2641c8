#include "trendskip/policy.hpp"

#include <algorithm>
#include <cmath>

#include "trendskip/rng.hpp"

namespace trendskip {

const char* policy_kind_name(PolicyKind p) {
    switch (p) {
        case PolicyKind::Full: return "full";
        case PolicyKind::TrendWindow: return "etc";
        case PolicyKind::NaiveReuse: return "naive-reuse";
        case PolicyKind::ResidualTrend: return "residual-trend";
    }
    return "unknown";
}

PolicyKind policy_kind_from_name(const std::string& name) {
    if (name == "full") return PolicyKind::Full;
    if (name == "etc") return PolicyKind::TrendWindow;
    if (name == "naive-reuse") return PolicyKind::NaiveReuse;
    if (name == "residual-trend") return PolicyKind::ResidualTrend;
    throw Error(ErrorKind::ParseError, "unknown policy '" + name + "'");
}

Latent ema_update(const std::optional<Latent>& delta_prev, const Latent& d, double alpha) {
    check_finite(d, "ema_update");
    if (!delta_prev) return d;
    check_same_dim(*delta_prev, d, "ema_update");
    Latent out = *delta_prev;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.values[i] = (1.0 - alpha) * out.values[i] + alpha * d.values[i];
    }
    return out;
}

Latent approx_output(const Latent& base, const Latent& delta, int k, int s) {
    if (k <= 0) throw Error(ErrorKind::WindowZero, "approximation window must be positive");
    if (s < 1 || s > k) {
        throw Error(ErrorKind::StepOutOfRange,
                    "s=" + std::to_string(s) + " outside [1, " + std::to_string(k) + "]");
    }
    check_same_dim(base, delta, "approx_output");
    Latent out = base;
    const double w = static_cast<double>(s) / static_cast<double>(k);
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += w * delta.values[i];
    return out;
}

double deviation(const Latent& eps_real, const Latent& last, const Latent& delta,
                 DeviationMetric metric) {
    check_same_dim(eps_real, last, "deviation");
    check_same_dim(eps_real, delta, "deviation");
    if (eps_real.size() == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < eps_real.size(); ++i) {
        const double gap = eps_real.values[i] - last.values[i] - delta.values[i];
        acc += metric == DeviationMetric::MeanAbs ? std::abs(gap) : gap * gap;
    }
    acc /= static_cast<double>(eps_real.size());
    return metric == DeviationMetric::MeanAbs ? acc : std::sqrt(acc);
}

int window_update(int k, double dev, double sigma, int remaining_steps) {
    if (remaining_steps < 1) {
        throw Error(ErrorKind::InvalidParameter, "window_update needs remaining_steps >= 1");
    }
    int next = dev < sigma ? k + 1 : k - 1;
    next = std::max(next, 0);
    next = std::min(next, remaining_steps - 1);
    return next;
}

namespace {

struct RunState {
    Latent x;
    std::optional<Latent> trend;
    std::optional<Latent> last_output;
    int window = 0;
    int t = 0;  // next timestep to process
    int nfe = 0;
};

void record_step(RunTrace& trace, const PolicyConfig& cfg, const RunState& st, StepAction action,
                 std::optional<double> dev, const Latent& output) {
    StepRecord rec;
    rec.t = st.t;
    rec.action = action;
    rec.window = st.window;
    rec.deviation = dev;
    rec.trend_norm = st.trend ? l2_norm(*st.trend) : 0.0;
    rec.output_hash = latent_hash(output);
    if (cfg.snapshots == SnapshotPolicy::Full) {
        rec.latent = st.x;
        rec.output = output;
    }
    trace.steps.push_back(std::move(rec));
}

RunTrace run_policy(PolicyKind policy, const OracleModel& model, const NoiseSchedule& sched,
                    const Latent& x_init, const PolicyConfig& cfg) {
    if (sched.T < 2) throw Error(ErrorKind::InvalidParameter, "run needs T >= 2");
    if (x_init.size() != model.dim()) {
        throw Error(ErrorKind::DimensionMismatch, "initial latent does not match model dimension");
    }
    check_shape_consistent(x_init, "run");
    check_finite(x_init, "run");
    if (policy != PolicyKind::Full) {
        if (!(cfg.alpha > 0.0) || cfg.alpha > 1.0) {
            throw Error(ErrorKind::ValidationError, "alpha must lie in (0, 1]");
        }
        if (cfg.warmup < 1) {
            throw Error(ErrorKind::ValidationError,
                        "warmup must be >= 1 so the trend can initialize");
        }
        if (cfg.warmup + 2 > sched.T) {
            throw Error(ErrorKind::ValidationError, "need n + 2 <= T");
        }
        if (!(cfg.sigma > 0.0)) throw Error(ErrorKind::ValidationError, "sigma must be > 0");
    }

    RunTrace trace;
    trace.config.policy = policy_kind_name(policy);
    trace.config.alpha = cfg.alpha;
    trace.config.warmup = cfg.warmup;
    trace.config.sigma = cfg.sigma;
    trace.config.seed = cfg.seed;
    trace.config.condition = cfg.condition;
    trace.config.snapshots = cfg.snapshots;
    trace.config.deviation_metric = cfg.deviation_metric;
    trace.config.model_spec = cfg.model_spec;
    trace.config.schedule = sched;

    RunState st;
    st.x = x_init;
    st.t = sched.T;

    // The residual-trend comparison policy keeps only the latest residual,
    // which is the alpha = 1 special case of the smoothing update.
    const double alpha = policy == PolicyKind::ResidualTrend ? 1.0 : cfg.alpha;

    auto real_inference = [&]() -> Latent {
        Latent eps = model.evaluate(st.x, st.t, cfg.condition);
        check_finite(eps, "model output");
        ++st.nfe;
        return eps;
    };

    auto step_with = [&](const Latent& eps) {
        st.x = denoise_step(st.x, eps, st.t, sched);
        --st.t;
    };

    if (policy == PolicyKind::Full) {
        while (st.t >= 1) {
            Latent eps = real_inference();
            record_step(trace, cfg, st, StepAction::Real, std::nullopt, eps);
            st.last_output = eps;
            step_with(eps);
        }
    } else {
        // Warmup: n+1 real steps; the trend appears with the second output.
        for (int i = 0; i <= cfg.warmup; ++i) {
            Latent eps = real_inference();
            if (st.last_output) {
                st.trend = ema_update(st.trend, sub(eps, *st.last_output), alpha);
            }
            record_step(trace, cfg, st, StepAction::Real, std::nullopt, eps);
            st.last_output = eps;
            step_with(eps);
        }

        // Rounds: a burst of `window` extrapolated steps, then one real step
        // that measures the deviation and adapts the window.
        while (st.t > 1) {
            const int burst = st.window;
            for (int s = 1; s <= burst; ++s) {
                Latent out;
                switch (policy) {
                    case PolicyKind::TrendWindow:
                        out = *st.last_output;
                        axpy(out, 1.0 / static_cast<double>(burst), *st.trend);
                        break;
                    case PolicyKind::NaiveReuse:
                        out = *st.last_output;
                        break;
                    case PolicyKind::ResidualTrend:
                        out = add(*st.last_output, *st.trend);
                        break;
                    default:
                        break;
                }
                record_step(trace, cfg, st, StepAction::Approx, std::nullopt, out);
                st.last_output = out;
                step_with(out);
            }

            Latent eps = real_inference();
            const double dev = deviation(eps, *st.last_output, *st.trend, cfg.deviation_metric);
            // One step stays reserved for the unconditional final inference,
            // so the next burst may use at most t - 3 steps.
            const int remaining = std::max(1, st.t - 2);
            st.window = window_update(st.window, dev, cfg.sigma, remaining);
            st.trend = ema_update(st.trend, sub(eps, *st.last_output), alpha);
            record_step(trace, cfg, st, StepAction::Real, dev, eps);
            st.last_output = eps;
            step_with(eps);
        }

        // Final step is always a real inference.
        if (st.t == 1) {
            Latent eps = real_inference();
            record_step(trace, cfg, st, StepAction::Real, std::nullopt, eps);
            st.last_output = eps;
            step_with(eps);
        }
    }

    trace.final_latent = st.x;
    if (!trace.final_latent.shape && model.latent_shape()) {
        trace.final_latent.shape = model.latent_shape();
    }
    trace.nfe = st.nfe;
    trace.total_steps = static_cast<int>(trace.steps.size());
    return trace;
}

}  // namespace

RunTrace run_etc(const OracleModel& model, const NoiseSchedule& sched, const Latent& x_init,
                 const PolicyConfig& config) {
    return run_policy(PolicyKind::TrendWindow, model, sched, x_init, config);
}

RunTrace run_baseline(PolicyKind policy, const OracleModel& model, const NoiseSchedule& sched,
                      const Latent& x_init, const PolicyConfig& config) {
    return run_policy(policy, model, sched, x_init, config);
}

Latent draw_initial_latent(const OracleModel& model, std::uint64_t seed, int condition) {
    Rng rng(mix_seed(seed, 0x696e6974ull + static_cast<std::uint64_t>(condition) * 0x9e37ull));
    return rng.standard_normal(model.dim(), model.latent_shape());
}

}  // namespace trendskip
