#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "trendskip/error_analysis.hpp"
#include "trendskip/oracle.hpp"
#include "trendskip/policy.hpp"
#include "trendskip/rng.hpp"
#include "trendskip/schedule.hpp"

using namespace trendskip;

namespace {

// Minimal reference simulator of the window schedule alone: every round
// grows the window by one (deviation always below threshold), with the same
// zero/remaining clamps as the controller.
int reference_nfe_all_grow(int T, int n) {
    int t = T;
    int nfe = 0;
    int k = 0;
    for (int i = 0; i <= n; ++i) {
        ++nfe;
        --t;
    }
    while (t > 1) {
        t -= k;  // burst
        ++nfe;   // round real step
        const int remaining = std::max(1, t - 2);
        k = std::min(k + 1, remaining - 1);
        k = std::max(k, 0);
        --t;
    }
    if (t == 1) ++nfe;
    return nfe;
}

PolicyConfig base_config(double sigma, std::uint64_t seed = 1) {
    PolicyConfig pc;
    pc.alpha = 0.5;
    pc.warmup = 6;
    pc.sigma = sigma;
    pc.seed = seed;
    pc.snapshots = SnapshotPolicy::Full;
    return pc;
}

}  // namespace

TEST_CASE("ema update: boundary and arithmetic cases") {
    const Latent first = ema_update(std::nullopt, Latent({0.2, -0.1}), 0.5);
    CHECK(first.values[0] == 0.2);
    CHECK(first.values[1] == -0.1);

    const Latent mid = ema_update(Latent({2.0}), Latent({0.0}), 0.5);
    CHECK(mid.values[0] == doctest::Approx(1.0).epsilon(1e-15));

    const Latent latest_only = ema_update(Latent({5.0}), Latent({-3.0}), 1.0);
    CHECK(latest_only.values[0] == doctest::Approx(-3.0).epsilon(1e-15));

    CHECK_THROWS_AS(ema_update(Latent({1.0, 2.0}), Latent({1.0}), 0.5), Error);
}

TEST_CASE("ema update chain matches the closed form") {
    Rng rng(15);
    for (double alpha : {0.1, 0.5, 0.9}) {
        for (int n : {1, 2, 5, 20}) {
            std::vector<Latent> diffs;
            std::optional<Latent> state;
            for (int i = 0; i < n; ++i) {
                diffs.push_back(testing::random_latent(rng, 6));
                state = ema_update(state, diffs.back(), alpha);
            }
            const Latent direct = closed_form_trend(diffs, alpha);
            CHECK(testing::max_abs_diff(*state, direct) <= 1e-12);
        }
    }
}

TEST_CASE("approx output: distribution across the window") {
    const Latent two_thirds = approx_output(Latent({1.0}), Latent({0.6}), 3, 2);
    CHECK(two_thirds.values[0] == doctest::Approx(1.4).epsilon(1e-15));

    // Endpoint: cumulative increments land on base + delta within 1e-12.
    Rng rng(8);
    const Latent base = testing::random_latent(rng, 5);
    const Latent delta = testing::random_latent(rng, 5);
    for (int k : {1, 3, 7, 19}) {
        Latent cumulative = base;
        for (int s = 1; s <= k; ++s) axpy(cumulative, 1.0 / k, delta);
        const Latent direct = approx_output(base, delta, k, k);
        CHECK(testing::max_abs_diff(direct, add(base, delta)) <= 1e-12);
        CHECK(testing::max_abs_diff(cumulative, add(base, delta)) <= 1e-12);
    }

    // Zero trend reuses the base output at every position.
    const Latent frozen = approx_output(base, zeros_like(base), 4, 3);
    CHECK(frozen.values == base.values);

    CHECK_THROWS_AS(approx_output(base, delta, 0, 1), Error);
    CHECK_THROWS_AS(approx_output(base, delta, 3, 4), Error);
    CHECK_THROWS_AS(approx_output(base, delta, 3, 0), Error);
}

TEST_CASE("deviation: scalar reduction") {
    const Latent last({1.0, 2.0});
    const Latent delta({0.5, -0.5});
    CHECK(deviation(add(last, delta), last, delta) == 0.0);
    CHECK(deviation(Latent({1.7, 1.3}), last, delta) == doctest::Approx(0.2).epsilon(1e-15));

    Rng rng(12);
    const Latent e = testing::random_latent(rng, 8);
    const Latent l = testing::random_latent(rng, 8);
    const Latent d = testing::random_latent(rng, 8);
    double expect = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
        expect += std::abs(e.values[i] - l.values[i] - d.values[i]);
    }
    expect /= 8.0;
    CHECK(deviation(e, l, d) == doctest::Approx(expect).epsilon(1e-15));

    CHECK_THROWS_AS(deviation(Latent({1.0}), l, d), Error);
}

TEST_CASE("window update: grow, shrink, clamps") {
    CHECK(window_update(3, 0.1, 0.2, 40) == 4);
    CHECK(window_update(0, 0.5, 0.2, 40) == 0);
    CHECK(window_update(2, 0.2, 0.2, 40) == 1);  // boundary shrinks
    CHECK(window_update(5, 0.0, 1.0, 3) == 2);   // remaining clamp
    CHECK(window_update(0, 0.0, 1.0, 1) == 0);
    CHECK_THROWS_AS(window_update(1, 0.1, 0.2, 0), Error);
}

TEST_CASE("adaptive run: huge threshold grows the window every round") {
    const NoiseSchedule sched = build_vp_schedule(50, 1e-4, 2e-2);
    const auto model = model_from_spec("builtin:std2", sched);
    const PolicyConfig pc = base_config(1e9);
    const Latent x_init = draw_initial_latent(*model, pc.seed, 0);
    const RunTrace trace = run_etc(*model, sched, x_init, pc);

    CHECK(trace.nfe == reference_nfe_all_grow(50, 6));
    CHECK(trace.total_steps == 50);
    CHECK(testing::window_dynamics_violations(trace) == 0);
}

TEST_CASE("adaptive run: vanishing threshold degenerates to full sampling") {
    const NoiseSchedule sched = build_vp_schedule(50, 1e-4, 2e-2);
    const auto model = model_from_spec("builtin:std2", sched);
    const PolicyConfig pc = base_config(1e-12);
    const Latent x_init = draw_initial_latent(*model, pc.seed, 0);

    const RunTrace adaptive = run_etc(*model, sched, x_init, pc);
    const RunTrace full = run_baseline(PolicyKind::Full, *model, sched, x_init, pc);

    CHECK(adaptive.nfe == 50);
    CHECK(adaptive.final_latent.values == full.final_latent.values);  // bit-identical
    for (const StepRecord& rec : adaptive.steps) CHECK(rec.action == StepAction::Real);
}

TEST_CASE("adaptive run: trace structure and bookkeeping invariants") {
    const NoiseSchedule sched = build_vp_schedule(50, 1e-4, 2e-2);
    const auto model = model_from_spec("builtin:std2", sched);

    for (double sigma : {5e-4, 2e-3, 1e-2, 5e-2}) {
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
            const PolicyConfig pc = base_config(sigma, seed);
            const Latent x_init = draw_initial_latent(*model, seed, 0);
            const RunTrace trace = run_etc(*model, sched, x_init, pc);

            // Timesteps cover T..1 exactly once, in order.
            REQUIRE(trace.total_steps == 50);
            for (int i = 0; i < 50; ++i) CHECK(trace.steps[i].t == 50 - i);

            // Warmup: first n+1 real; trend is live from the second step on.
            const auto shape = testing::parse_trace_shape(trace);
            CHECK(shape.warmup_steps == 7);
            CHECK(trace.steps[0].trend_norm == 0.0);
            CHECK(trace.steps[1].trend_norm > 0.0);

            // Final step is real; nfe counts exactly the real steps.
            CHECK(trace.steps.back().action == StepAction::Real);
            int reals = 0;
            for (const auto& rec : trace.steps) reals += rec.action == StepAction::Real;
            CHECK(reals == trace.nfe);

            // Step-count identity: warmup + sum(k_r + 1) + final == T.
            int accounted = shape.warmup_steps + 1;
            for (int k : shape.burst_lengths) accounted += k + 1;
            CHECK(accounted == 50);

            CHECK(testing::window_dynamics_violations(trace) == 0);
        }
    }
}

TEST_CASE("adaptive run: same seed reproduces the trace bit-exactly") {
    const NoiseSchedule sched = build_vp_schedule(40, 1e-4, 2e-2);
    const auto model = model_from_spec("builtin:std2", sched);
    const PolicyConfig pc = base_config(5e-3, 42);
    const Latent x_init = draw_initial_latent(*model, 42, 0);
    const RunTrace a = run_etc(*model, sched, x_init, pc);
    const RunTrace b = run_etc(*model, sched, x_init, pc);
    CHECK(a == b);
}

TEST_CASE("baselines: full every step, naive degenerate threshold") {
    const NoiseSchedule sched = build_vp_schedule(30, 1e-4, 2e-2);
    const auto model = model_from_spec("builtin:std2", sched);
    const Latent x_init = draw_initial_latent(*model, 5, 0);

    PolicyConfig pc = base_config(1e-2, 5);
    const RunTrace full = run_baseline(PolicyKind::Full, *model, sched, x_init, pc);
    CHECK(full.nfe == 30);
    for (const auto& rec : full.steps) CHECK(rec.action == StepAction::Real);

    // Plain sampling loop gives the same trajectory bit-exactly.
    Latent x = x_init;
    for (int t = 30; t >= 1; --t) x = denoise_step(x, model->evaluate(x, t, 0), t, sched);
    CHECK(full.final_latent.values == x.values);

    pc.sigma = 1e-12;
    const RunTrace naive = run_baseline(PolicyKind::NaiveReuse, *model, sched, x_init, pc);
    CHECK(naive.nfe == 30);
    CHECK(naive.final_latent.values == full.final_latent.values);
}

TEST_CASE("baselines: shared window mechanics, different burst outputs") {
    const NoiseSchedule sched = build_vp_schedule(50, 1e-4, 2e-2);
    const auto model = model_from_spec("builtin:std2", sched);
    const PolicyConfig pc = base_config(5e-3, 11);
    const Latent x_init = draw_initial_latent(*model, 11, 0);

    const RunTrace naive = run_baseline(PolicyKind::NaiveReuse, *model, sched, x_init, pc);
    const RunTrace residual = run_baseline(PolicyKind::ResidualTrend, *model, sched, x_init, pc);
    CHECK(testing::window_dynamics_violations(naive) == 0);
    CHECK(testing::window_dynamics_violations(residual) == 0);

    // Naive bursts repeat the previous output verbatim.
    for (std::size_t i = 1; i < naive.steps.size(); ++i) {
        if (naive.steps[i].action == StepAction::Approx) {
            CHECK(naive.steps[i].output->values == naive.steps[i - 1].output->values);
        }
    }
    // Residual-trend bursts move by the full trend each step.
    bool checked = false;
    for (std::size_t i = 1; i < residual.steps.size(); ++i) {
        if (residual.steps[i].action == StepAction::Approx &&
            residual.steps[i - 1].action == StepAction::Real) {
            const Latent step_gap =
                sub(*residual.steps[i].output, *residual.steps[i - 1].output);
            CHECK(l2_norm(step_gap) > 0.0);
            checked = true;
        }
    }
    CHECK(checked);
}

TEST_CASE("run validation") {
    const NoiseSchedule sched = build_vp_schedule(10, 1e-4, 2e-2);
    const auto model = model_from_spec("builtin:std2", sched);
    const Latent x_init = draw_initial_latent(*model, 1, 0);

    PolicyConfig pc = base_config(1e-2);
    pc.warmup = 9;  // needs n + 2 <= T
    CHECK_THROWS_AS(run_etc(*model, sched, x_init, pc), Error);

    pc = base_config(1e-2);
    pc.alpha = 1.5;
    CHECK_THROWS_AS(run_etc(*model, sched, x_init, pc), Error);

    pc = base_config(1e-2);
    pc.warmup = 0;
    CHECK_THROWS_AS(run_etc(*model, sched, x_init, pc), Error);

    pc = base_config(0.0);
    CHECK_THROWS_AS(run_etc(*model, sched, x_init, pc), Error);

    CHECK_THROWS_AS(run_etc(*model, sched, Latent({1.0, 2.0, 3.0}), base_config(1e-2)), Error);
}
