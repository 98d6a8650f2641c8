#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_support.hpp"
#include "trendskip/config.hpp"
#include "trendskip/rng.hpp"

using namespace trendskip;

TEST_CASE("config: minimal text gets the documented defaults") {
    const ExperimentConfig cfg = parse_config(
        "[model]\n"
        "spec = builtin:std2\n"
        "[schedule]\n"
        "kind = vp\n"
        "steps = 50\n");
    CHECK(cfg.alpha == 0.5);
    CHECK(cfg.warmup == 6);
    CHECK(!cfg.sigma.has_value());  // search by default
    CHECK(cfg.policy == PolicyKind::TrendWindow);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{1});
}

TEST_CASE("config: validation errors") {
    CHECK_THROWS_AS(parse_config("[policy]\nalpha = 1.5\n"), Error);
    CHECK_THROWS_AS(parse_config("[policy]\nn = 0\n"), Error);
    CHECK_THROWS_AS(parse_config("[policy]\nsigma = -1\n"), Error);
    CHECK_THROWS_AS(parse_config("[schedule]\nsteps = 1\n"), Error);
    CHECK_THROWS_AS(parse_config("[run]\nseeds =\n"), Error);
    CHECK_THROWS_AS(parse_config("[model]\nspec = gmm:/no/such/file.json\n"), Error);
}

TEST_CASE("config: parse diagnostics carry line numbers and reject unknowns") {
    try {
        parse_config("[schedule]\nkind = vp\nbogus_key = 3\n");
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ParseError);
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        CHECK(std::string(e.what()).find("schedule.bogus_key") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("key_without_section = 1\n"), Error);
    CHECK_THROWS_AS(parse_config("[schedule\nkind = vp\n"), Error);
    CHECK_THROWS_AS(parse_config("[schedule]\nno_equals_sign\n"), Error);
}

TEST_CASE("config: overrides win over file values") {
    const ExperimentConfig cfg = parse_config(
        "[policy]\n"
        "alpha = 0.5\n"
        "sigma = 0.25\n",
        {{"policy.alpha", "0.7"}, {"policy.sigma", "search"}, {"run.seeds", "4,5,6"}});
    CHECK(cfg.alpha == 0.7);
    CHECK(!cfg.sigma.has_value());
    CHECK(cfg.seeds == std::vector<std::uint64_t>{4, 5, 6});
}

TEST_CASE("config: canonical emission round-trips structurally") {
    Rng rng(77);
    for (int rep = 0; rep < 50; ++rep) {
        ExperimentConfig cfg;
        cfg.schedule_kind = rng.uniform01() < 0.5 ? ScheduleKind::VpDdim : ScheduleKind::RectifiedFlow;
        cfg.steps = 10 + int(rng.uniform01() * 90);
        if (cfg.schedule_kind == ScheduleKind::VpDdim) {
            // Emission only carries betas for vp schedules.
            cfg.beta_min = 1e-4 * (0.5 + rng.uniform01());
            cfg.beta_max = 2e-2 * (0.5 + rng.uniform01());
        }
        cfg.model_spec = rng.uniform01() < 0.5 ? "builtin:std2" : "builtin:grid8";
        cfg.condition = int(rng.uniform01() * 4);
        cfg.search_conditions = {0, 1 + int(rng.uniform01() * 3)};
        cfg.policy = rng.uniform01() < 0.5 ? PolicyKind::TrendWindow : PolicyKind::NaiveReuse;
        cfg.alpha = 0.1 + 0.9 * rng.uniform01();
        cfg.warmup = 1 + int(rng.uniform01() * 5);
        if (rng.uniform01() < 0.5) cfg.sigma = 0.01 + rng.uniform01();
        cfg.deviation_metric = rng.uniform01() < 0.5 ? DeviationMetric::MeanAbs : DeviationMetric::Rms;
        cfg.seeds = {rng.uniform01() < 0.5 ? 1ull : 123456789ull, 7ull};
        cfg.snapshots = rng.uniform01() < 0.5 ? SnapshotPolicy::HashOnly : SnapshotPolicy::Full;
        cfg.out_dir = rng.uniform01() < 0.5 ? "" : "results";
        cfg.threads = 1 + int(rng.uniform01() * 3);
        cfg.search_seeds = 1 + int(rng.uniform01() * 5);
        cfg.search_metric = rng.uniform01() < 0.5 ? SimMetric::Cosine : SimMetric::OneMinusNrmse;
        if (rng.uniform01() < 0.5) cfg.sweep_sigmas = {0.1, 0.01};
        if (rng.uniform01() < 0.5) cfg.sweep_warmups = {2, 6};
        if (rng.uniform01() < 0.5) cfg.sweep_alphas = {0.3, 0.5, 0.7};

        const ExperimentConfig back = parse_config(emit_config(cfg));
        CHECK(back == cfg);
    }
}
