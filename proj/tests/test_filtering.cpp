#include <doctest.h>

#include <cmath>
#include <cstdint>

#include "rholab/errors.hpp"
#include "rholab/filtering.hpp"
#include "rholab/path_grid.hpp"
#include "rholab/sde_model.hpp"

using namespace rholab;

namespace {

// Exact Kalman recursion for the time-discretised linear-Gaussian system
// seen by the Monte Carlo weights: X_{k+1} = (1-a dt) X_k + sigma sqrt(dt) xi,
// dY_k = dt X_k + sqrt(dt) nu.  Update with the left-point measurement, then
// predict.
struct DiscreteKalman {
    double mean = 0.0;
    double variance = 0.0;
};

DiscreteKalman discrete_kalman(const PathGrid& g, double a, double sigma, double m0, double p0) {
    double m = m0, p = p0;
    const double dt = g.dt();
    for (int k = 0; k < g.M; ++k) {
        const double s = dt * dt * p + dt;
        const double gain = p * dt / s;
        m += gain * (g.dY(k, 0) - dt * m);
        p *= (1.0 - gain * dt);
        m *= (1.0 - a * dt);
        p = (1.0 - a * dt) * (1.0 - a * dt) * p + sigma * sigma * dt;
    }
    return {m, p};
}

const auto identity_obs = [](const Vec& x) { return x[0]; };

} // namespace

TEST_SUITE("filtering") {

TEST_CASE("functional is linear in the observable under shared paths") {
    const auto m = preset_linear_gaussian();
    Vec x0(1);
    x0[0] = 0.5;
    const PathGrid g = sample_observation_path(m, x0, 0.5, 250, 2024, 3);
    const auto res = rho_mc_multi(
        m, x0, g,
        {[](const Vec& x) { return x[0]; }, [](const Vec& x) { return x[0] * x[0]; },
         [](const Vec& x) { return x[0] + 2.0 * x[0] * x[0]; }},
        2000, 42);
    const double combo = res[0].value + 2.0 * res[1].value;
    CHECK(std::abs(res[2].value - combo) <= 1e-12 * std::max(1.0, std::abs(combo)));

    const auto unit = rho_mc(m, x0, g, [](const Vec&) { return 1.0; }, 500, 42);
    CHECK(unit.normalised == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(unit.value == doctest::Approx(unit.mass).epsilon(1e-15));
}

TEST_CASE("Riccati flow settles at the stationary variance") {
    // a = 1, sigma = sqrt(2): P* solves P^2 + 2P - 2 = 0, P* = sqrt(3) - 1.
    PathGrid g = make_grid(10.0, 10000, 1, 1);
    fill_brownian_observation(g, 5, 0);
    const auto kb = kalman_bucy_oracle(1.0, std::sqrt(2.0), g, 0.0, 2.0);
    CHECK(kb.variance[g.M] == doctest::Approx(std::sqrt(3.0) - 1.0).epsilon(2e-3));
    CHECK(kb.mean.size() == g.M + 1);
}

TEST_CASE("filter mean matches the exact discrete Kalman recursion") {
    const auto m = preset_linear_gaussian();
    Vec x0(1);
    x0[0] = 0.3;
    const PathGrid g = sample_observation_path(m, x0, 0.5, 500, 11, 5);
    const DiscreteKalman kf = discrete_kalman(g, 1.0, 1.0, 0.3, 0.0);

    // The weighted functional targets the discrete posterior with no bias,
    // so the comparison is pure Monte Carlo noise.
    const auto rho = rho_mc(m, x0, g, identity_obs, 40000, 7);
    CHECK(std::abs(rho.normalised - kf.mean) <= 3.5 * rho.normalised_stderr);

    const auto pf = particle_filter(m, x0, g, identity_obs, 4000, 5, 13);
    CHECK(std::abs(pf.normalised - kf.mean) <= 3.5 * pf.stderr_ + 3e-3);

    // The continuous-time oracle differs only by its O(dt) integration error.
    const auto kb = kalman_bucy_oracle(1.0, 1.0, g, 0.3, 0.0);
    CHECK(std::abs(kb.mean[g.M] - kf.mean) <= 0.02);
    CHECK(std::abs(kb.variance[g.M] - kf.variance) <= 0.02);
}

TEST_CASE("total mass averages to one over reference observations") {
    const auto m = preset_linear_gaussian();
    Vec x0(1);
    x0[0] = 1.0;
    const int n_obs = 50;
    double sum = 0.0, sum_sq = 0.0;
    for (int r = 0; r < n_obs; ++r) {
        PathGrid g = make_grid(1.0, 200, 1, 1);
        fill_brownian_observation(g, 777, static_cast<std::uint64_t>(r));
        const double mass =
            rho_mc(m, x0, g, [](const Vec&) { return 1.0; }, 2000, 901,
                   static_cast<std::uint64_t>(r) * 100000)
                .mass;
        sum += mass;
        sum_sq += mass * mass;
    }
    const double mean = sum / n_obs;
    const double sd = std::sqrt(std::max(0.0, sum_sq / n_obs - mean * mean));
    const double se = sd / std::sqrt(static_cast<double>(n_obs));
    CHECK(std::abs(mean - 1.0) <= 3.0 * se + 0.02);
}

TEST_CASE("weight overflow and weight collapse raise numerical guards") {
    const auto m = preset_linear_gaussian();
    SUBCASE("log-weight magnitude guard") {
        Vec x0(1);
        x0[0] = 80.0;
        PathGrid g = make_grid(0.1, 10, 1, 1);
        for (int k = 6; k <= 10; ++k) g.Y(k, 0) = 20.0; // one violent increment
        CHECK_THROWS_AS((void)rho_mc(m, x0, g, identity_obs, 10, 3), NumericalGuardError);
    }
    SUBCASE("effective-sample-size guard") {
        Vec x0(1);
        x0[0] = 0.0;
        PathGrid g = make_grid(0.5, 10, 1, 1);
        for (int k = 6; k <= 10; ++k) g.Y(k, 0) = 1000.0;
        CHECK_THROWS_AS((void)particle_filter(m, x0, g, identity_obs, 200, 2, 3),
                        NumericalGuardError);
    }
}

TEST_CASE("pathwise mass lower bound holds across scenarios") {
    const auto m = preset_cubic_sensor();
    Vec x0(1);
    x0[0] = 0.2;
    const SpatialGrid sgrid(1, 201, 2.5);
    for (std::uint64_t sc = 0; sc < 10; ++sc) {
        const PathGrid g = sample_observation_path(m, x0, 0.5, 250, 555, sc);
        const auto rep = mass_lower_bound_check(m, x0, g, sgrid, 2000, 901, sc * 100000);
        CHECK(rep.pass);
        CHECK(rep.bound > 1.0);
        CHECK(rep.inv_mass > 0.0);
        CHECK(rep.constant >= 1.0);
        CHECK(rep.constant < 10.0);
    }
}

TEST_CASE("particle filter and weighted functional agree on a nonlinear sensor") {
    const auto m = preset_cubic_sensor();
    Vec x0(1);
    x0[0] = 0.2;
    const PathGrid g = sample_observation_path(m, x0, 0.5, 100, 77, 1);
    const auto rho = rho_mc(m, x0, g, identity_obs, 20000, 5);
    const auto pf = particle_filter(m, x0, g, identity_obs, 2000, 5, 9);
    const double tol =
        3.0 * std::sqrt(rho.normalised_stderr * rho.normalised_stderr +
                        pf.stderr_ * pf.stderr_) +
        3e-3;
    CHECK(std::abs(rho.normalised - pf.normalised) <= tol);
}

TEST_CASE("runs are reproducible bitwise") {
    const auto m = preset_ou_tanh();
    Vec x0(1);
    x0[0] = 0.1;
    const PathGrid g = sample_observation_path(m, x0, 0.3, 60, 123, 2);
    const auto r1 = rho_mc(m, x0, g, identity_obs, 500, 71);
    const auto r2 = rho_mc(m, x0, g, identity_obs, 500, 71);
    CHECK(r1.value == r2.value);
    CHECK(r1.mass == r2.mass);
    const auto p1 = particle_filter(m, x0, g, identity_obs, 100, 3, 5);
    const auto p2 = particle_filter(m, x0, g, identity_obs, 100, 3, 5);
    CHECK(p1.normalised == p2.normalised);
    CHECK(p1.log_mass == p2.log_mass);
}

TEST_CASE("argument validation") {
    const auto m = preset_linear_gaussian();
    Vec x0(1);
    x0[0] = 0.0;
    const PathGrid g = sample_observation_path(m, x0, 0.2, 20, 1, 0);
    CHECK_THROWS_AS((void)rho_mc(m, Vec::Zero(2), g, identity_obs, 10, 1), ValidationError);
    CHECK_THROWS_AS((void)rho_mc(m, x0, g, identity_obs, 0, 1), ValidationError);
    const PathGrid g2 = make_grid(0.2, 20, 1, 2); // two observation channels
    CHECK_THROWS_AS((void)rho_mc(m, x0, g2, identity_obs, 10, 1), ValidationError);
    CHECK_THROWS_AS((void)particle_filter(m, x0, g, identity_obs, 1, 5, 1), ValidationError);
    CHECK_THROWS_AS((void)particle_filter(m, x0, g, identity_obs, 10, 1, 1), ValidationError);
    CHECK_THROWS_AS((void)kalman_bucy_oracle(1.0, 1.0, g, 0.0, -1.0), ValidationError);
}

} // TEST_SUITE
