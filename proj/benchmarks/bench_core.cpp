#include <benchmark/benchmark.h>

#include "trendskip/oracle.hpp"
#include "trendskip/policy.hpp"
#include "trendskip/rng.hpp"
#include "trendskip/schedule.hpp"
#include "trendskip/tolerance.hpp"

using namespace trendskip;

namespace {

void BM_DenoiseStep(benchmark::State& state) {
    const NoiseSchedule sched = build_vp_schedule(50, 1e-4, 2e-2);
    Rng rng(1);
    const Latent x = rng.standard_normal(state.range(0));
    const Latent eps = rng.standard_normal(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(denoise_step(x, eps, 25, sched));
    }
}
BENCHMARK(BM_DenoiseStep)->Arg(2)->Arg(64)->Arg(4096);

void BM_NoiseOracle(benchmark::State& state) {
    const NoiseSchedule sched = build_vp_schedule(50, 1e-4, 2e-2);
    const std::string family = state.range(0) == 2 ? "std2" : "grid8";
    const GaussianMixture gmm = builtin_mixture(family, 0);
    Rng rng(2);
    const Latent x = rng.standard_normal(gmm.dim());
    for (auto _ : state) {
        benchmark::DoNotOptimize(gmm_eps_oracle(x, 25, sched, gmm));
    }
}
BENCHMARK(BM_NoiseOracle)->Arg(2)->Arg(64);

void BM_AdaptiveRun(benchmark::State& state) {
    const NoiseSchedule sched = build_vp_schedule(50, 1e-4, 2e-2);
    const auto model = model_from_spec("builtin:std2", sched);
    PolicyConfig pc;
    pc.sigma = 5e-3;
    const Latent x_init = draw_initial_latent(*model, 1, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_etc(*model, sched, x_init, pc));
    }
}
BENCHMARK(BM_AdaptiveRun);

void BM_FullRun(benchmark::State& state) {
    const NoiseSchedule sched = build_vp_schedule(50, 1e-4, 2e-2);
    const auto model = model_from_spec("builtin:std2", sched);
    PolicyConfig pc;
    const Latent x_init = draw_initial_latent(*model, 1, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_baseline(PolicyKind::Full, *model, sched, x_init, pc));
    }
}
BENCHMARK(BM_FullRun);

void BM_ChangePoint(benchmark::State& state) {
    Rng rng(3);
    std::vector<double> curve(state.range(0));
    for (std::size_t i = 0; i < curve.size(); ++i) {
        curve[i] = (i < curve.size() / 3 ? 0.4 : 0.9) + 0.01 * rng.gaussian();
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(detect_change_point(curve));
    }
}
BENCHMARK(BM_ChangePoint)->Arg(49)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
