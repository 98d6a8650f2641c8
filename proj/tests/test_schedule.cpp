#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "trendskip/mixture.hpp"
#include "trendskip/oracle.hpp"
#include "trendskip/rng.hpp"
#include "trendskip/schedule.hpp"

using namespace trendskip;

namespace {

// Independent coefficient oracle: rebuild the cumulative products from the
// beta ramp with no shared code beyond the ramp definition.
struct VpReference {
    std::vector<double> abar;  // index t in [0, T]
    explicit VpReference(int T, double beta_min, double beta_max) {
        abar.resize(T + 1);
        abar[0] = 1.0;
        for (int t = 1; t <= T; ++t) {
            const double beta = beta_min + (beta_max - beta_min) * (t - 1) / double(T - 1);
            abar[t] = abar[t - 1] * (1.0 - beta);
        }
    }
    double a(int t) const { return std::sqrt(abar[t]); }
    double s(int t) const { return std::sqrt(1.0 - abar[t]); }
    double f(int t) const { return a(t - 1) / a(t); }
    double g(int t) const { return a(t - 1) * s(t) / a(t) - s(t - 1); }
};

NoiseSchedule tiny_sched(double f, double g) {
    NoiseSchedule sched;
    sched.kind = ScheduleKind::VpDdim;
    sched.T = 2;
    sched.f = {f, f};
    sched.g = {g, g};
    sched.a = {1.0, 1.0, 1.0};
    sched.s = {0.0, 0.0, 0.0};
    return sched;
}

}  // namespace

TEST_CASE("vp schedule: degenerate beta keeps steps near identity") {
    const NoiseSchedule sched = build_vp_schedule(2, 1e-6, 2e-6);
    // f = 1/sqrt(1-beta) exceeds 1 by at most ~beta; g stays O(sqrt(beta)).
    for (double f : sched.f) {
        CHECK(f > 0.0);
        CHECK(f <= 1.0 + 2e-6);
    }
    for (double g : sched.g) {
        CHECK(g >= 0.0);
        CHECK(g <= 2e-3);
    }
}

TEST_CASE("vp schedule: variance preservation and monotone scales") {
    const NoiseSchedule sched = build_vp_schedule(50, 1e-4, 2e-2);
    CHECK(sched.a[0] * sched.a[0] + sched.s[0] * sched.s[0] == doctest::Approx(1.0).epsilon(1e-12));
    for (int t = 0; t <= 50; ++t) {
        CHECK(std::abs(sched.a[t] * sched.a[t] + sched.s[t] * sched.s[t] - 1.0) <= 1e-12);
    }
    for (int t = 1; t <= 50; ++t) {
        CHECK(sched.a[t] < sched.a[t - 1]);  // signal grows toward t=0
        CHECK(sched.s[t] > sched.s[t - 1]);
    }
}

TEST_CASE("vp schedule: coefficients match an independent recomputation") {
    const NoiseSchedule sched = build_vp_schedule(50, 1e-4, 2e-2);
    const VpReference ref(50, 1e-4, 2e-2);
    for (int t = 1; t <= 50; ++t) {
        CHECK(std::abs(sched.f[t - 1] - ref.f(t)) <= 1e-12);
        CHECK(std::abs(sched.g[t - 1] - ref.g(t)) <= 1e-12);
        CHECK(std::abs(sched.a[t] - ref.a(t)) <= 1e-12);
        CHECK(std::abs(sched.s[t] - ref.s(t)) <= 1e-12);
    }
}

TEST_CASE("vp schedule: gains stay within the bound-analysis range") {
    const NoiseSchedule sched = build_vp_schedule(50, 1e-4, 2e-2);
    // f(t) = 1/sqrt(1-beta_t) exceeds 1 by at most beta_max; g stays in [0, 1].
    for (double f : sched.f) {
        CHECK(f > 0.0);
        CHECK(f <= 1.0 / std::sqrt(1.0 - 2e-2) + 1e-15);
    }
    for (double g : sched.g) {
        CHECK(g >= 0.0);
        CHECK(g <= 1.0);
    }
}

TEST_CASE("vp schedule: parameter validation") {
    CHECK_THROWS_AS(build_vp_schedule(1, 1e-4, 2e-2), Error);
    CHECK_THROWS_AS(build_vp_schedule(10, 0.0, 2e-2), Error);
    CHECK_THROWS_AS(build_vp_schedule(10, 2e-2, 1e-4), Error);
    CHECK_THROWS_AS(build_vp_schedule(10, 1e-4, 1.0), Error);
}

TEST_CASE("flow schedule: uniform grid") {
    const NoiseSchedule s4 = build_flow_schedule(4);
    const std::vector<double> expect_tau = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (int t = 0; t <= 4; ++t) {
        CHECK(s4.s[t] == doctest::Approx(expect_tau[t]).epsilon(1e-15));
        CHECK(s4.a[t] == doctest::Approx(1.0 - expect_tau[t]).epsilon(1e-15));
    }
    for (double g : s4.g) CHECK(std::abs(g) == doctest::Approx(0.25));
    for (double f : s4.f) CHECK(f == 1.0);

    const NoiseSchedule s2 = build_flow_schedule(2);
    for (double g : s2.g) CHECK(g == doctest::Approx(0.5));
    CHECK_THROWS_AS(build_flow_schedule(1), Error);
}

TEST_CASE("flow schedule: coarse grid tracks a fine-grid reference transport") {
    const GaussianMixture gmm = [] {
        GaussianMixture g;
        g.weights = {1.0};
        g.means = {{2.0, -1.0}};
        g.variances = {{0.25, 0.25}};
        return g;
    }();

    Rng rng(77);
    const Latent start = rng.standard_normal(2);

    auto transport = [&](int T) {
        const NoiseSchedule sched = build_flow_schedule(T);
        Latent x = start;
        for (int t = T; t >= 1; --t) {
            const Latent v = gmm_velocity_oracle(x, double(t) / T, gmm);
            x = denoise_step(x, v, t, sched);
        }
        return x;
    };

    const Latent coarse = transport(50);
    const Latent fine = transport(500);
    CHECK(mean_squared_error(coarse, fine) <= 1e-2);
}

TEST_CASE("denoise step: arithmetic cases") {
    const NoiseSchedule sched = tiny_sched(0.5, 0.25);
    const Latent out = denoise_step(Latent({2.0}), Latent({1.0}), 1, sched);
    CHECK(out.values[0] == doctest::Approx(0.75).epsilon(1e-15));

    const NoiseSchedule identity = tiny_sched(1.0, 0.0);
    const Latent same = denoise_step(Latent({3.0, -4.0}), Latent({9.0, 9.0}), 2, identity);
    CHECK(same.values[0] == 3.0);
    CHECK(same.values[1] == -4.0);

    const NoiseSchedule pure_noise = tiny_sched(1.0, 0.1);
    const Latent nr = denoise_step(Latent({0.0, 0.0}), Latent({1.0, -1.0}), 1, pure_noise);
    CHECK(nr.values[0] == doctest::Approx(-0.1).epsilon(1e-15));
    CHECK(nr.values[1] == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("denoise step: errors") {
    const NoiseSchedule sched = build_vp_schedule(10, 1e-4, 2e-2);
    CHECK_THROWS_AS(denoise_step(Latent({1.0}), Latent({1.0, 2.0}), 5, sched), Error);
    CHECK_THROWS_AS(denoise_step(Latent({1.0}), Latent({1.0}), 0, sched), Error);
    CHECK_THROWS_AS(denoise_step(Latent({1.0}), Latent({1.0}), 11, sched), Error);
}

TEST_CASE("denoise step: linear in both arguments") {
    const NoiseSchedule sched = build_vp_schedule(20, 1e-4, 2e-2);
    Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        const Latent x = testing::random_latent(rng, 8);
        const Latent eps = testing::random_latent(rng, 8);
        const double c = rng.gaussian();
        const int t = 1 + int(rng.uniform01() * 20);
        const Latent scaled = denoise_step(scale(x, c), scale(eps, c), t, sched);
        const Latent direct = scale(denoise_step(x, eps, t, sched), c);
        CHECK(testing::max_abs_diff(scaled, direct) <= 1e-12);
    }
}

TEST_CASE("schedule json round-trip") {
    for (const NoiseSchedule& sched :
         {build_vp_schedule(13, 3e-4, 1.7e-2), build_flow_schedule(9)}) {
        const NoiseSchedule back = schedule_from_json_string(schedule_to_json_string(sched));
        CHECK(back == sched);
    }
    CHECK_THROWS_AS(schedule_from_json_string("{"), Error);
}

TEST_CASE("schedule spec round-trip") {
    const NoiseSchedule vp = schedule_from_spec("vp:T=50,beta_min=1e-4,beta_max=2e-2");
    CHECK(vp.T == 50);
    CHECK(vp == schedule_from_spec(schedule_to_spec(vp)));
    const NoiseSchedule flow = schedule_from_spec("flow:T=12");
    CHECK(flow == schedule_from_spec(schedule_to_spec(flow)));
    CHECK_THROWS_AS(schedule_from_spec("vp:beta_min=1e-4"), Error);
    CHECK_THROWS_AS(schedule_from_spec("vp:T=10,bogus=1"), Error);
}
