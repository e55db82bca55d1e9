#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

#include "rholab/errors.hpp"
#include "rholab/iterated_integrals.hpp"
#include "rholab/path_grid.hpp"
#include "rholab/special_functions.hpp"

using namespace rholab;

namespace {

PathGrid brownian_grid(double T, int M, int d2, std::uint64_t seed) {
    PathGrid g = make_grid(T, M, 1, d2);
    fill_brownian_observation(g, seed, 7);
    return g;
}

// Deterministic smooth path Y_t = t on one channel.
PathGrid linear_grid(double T, int M) {
    PathGrid g = make_grid(T, M, 1, 1);
    for (int k = 0; k <= M; ++k) g.Y(k, 0) = g.time(k);
    return g;
}

double abs_tol(double scale, double eps) { return eps * std::max(1.0, std::abs(scale)); }

} // namespace

TEST_SUITE("iterated_integrals") {

TEST_CASE("word indexing enumerates the alphabet in base order") {
    const auto words = observation_words(2, 2);
    REQUIRE(words.size() == 4);
    CHECK(words[0] == MultiIndex{1, 1});
    CHECK(words[1] == MultiIndex{1, 2});
    CHECK(words[2] == MultiIndex{2, 1});
    CHECK(words[3] == MultiIndex{2, 2});
    for (int i = 0; i < 4; ++i) CHECK(word_index(words[i], 2) == i);

    const auto empty = observation_words(0, 3);
    REQUIRE(empty.size() == 1);
    CHECK(empty[0].empty());
    CHECK(word_index({}, 2) == 0);

    CHECK_THROWS_AS((void)word_index({0, 1}, 2), ValidationError);
    CHECK_THROWS_AS((void)word_index({3}, 2), ValidationError);
    CHECK_THROWS_AS((void)observation_words(-1, 2), ValidationError);
}

TEST_CASE("level-one integral telescopes to the path increment") {
    const auto g = brownian_grid(1.0, 512, 2, 20250901);
    for (int i = 1; i <= 2; ++i) {
        for (auto [s, t] : {std::pair{0, 512}, {17, 400}, {100, 101}, {250, 250}}) {
            const double inc = g.Y(t, i - 1) - g.Y(s, i - 1);
            CHECK(std::abs(iterated_ito(g, {i}, s, t) - inc) <= abs_tol(inc, 1e-12));
        }
    }
}

TEST_CASE("left-point double integral matches its closed form") {
    const auto g = brownian_grid(1.0, 512, 1, 99);
    for (auto [s, t] : {std::pair{0, 512}, {64, 448}, {7, 19}}) {
        const double inc = g.Y(t, 0) - g.Y(s, 0);
        double quad = 0.0;
        for (int k = s; k < t; ++k) quad += g.dY(k, 0) * g.dY(k, 0);
        const double closed = 0.5 * (inc * inc - quad);
        CHECK(std::abs(iterated_ito(g, {1, 1}, s, t) - closed) <= 1e-14);
    }
}

TEST_CASE("Chen identity holds at grid precision") {
    const auto g = brownian_grid(1.0, 2048, 2, 4242);
    for (auto [s, u, t] :
         {std::tuple{0, 1024, 2048}, {100, 150, 1900}, {0, 3, 2048}, {500, 1500, 1600}}) {
        const auto rep = chen_check(g, 4, s, u, t);
        CHECK(rep.max_violation <= 1e-12);
    }
    // Degenerate split points: the product collapses to one factor exactly.
    CHECK(chen_check(g, 4, 100, 100, 900).max_violation == 0.0);
    CHECK(chen_check(g, 4, 100, 900, 900).max_violation == 0.0);
    CHECK_THROWS_AS((void)chen_check(g, 2, 10, 5, 20), ValidationError);
}

TEST_CASE("shuffle product closes with the quadratic covariation") {
    const auto g = brownian_grid(1.0, 1024, 2, 777);
    for (auto [i, j] : {std::pair{1, 2}, {2, 1}, {1, 1}, {2, 2}}) {
        CHECK(shuffle_pair_residual(g, i, j, 0, 1024) <= 1e-13);
        CHECK(shuffle_pair_residual(g, i, j, 200, 700) <= 1e-13);
    }
}

TEST_CASE("table, single evaluator, and series agree") {
    const auto g = brownian_grid(2.0, 600, 2, 555);
    const int s = 100;
    const IteratedIntegralTable table(g, s, 3);
    CHECK(table.t_max() == 600);
    for (int len = 0; len <= 3; ++len) {
        for (const auto& w : observation_words(len, 2)) {
            for (int k : {100, 101, 350, 600}) {
                const double direct = iterated_ito(g, w, s, k);
                CHECK(table.value(w, k) == direct);
            }
        }
    }
    const auto sig = signature_series(g, s, 350, 3);
    for (int len = 0; len <= 3; ++len)
        for (const auto& w : observation_words(len, 2))
            CHECK(std::abs(sig.level[len][word_index(w, 2)] - table.value(w, 350)) <= 1e-14);

    CHECK_THROWS_AS((void)table.value({1, 2, 1, 1}, 200), ValidationError);
    CHECK_THROWS_AS((void)table.value({1}, 50), ValidationError);
}

TEST_CASE("time-based lookup requires grid times") {
    const auto g = brownian_grid(1.0, 100, 1, 31);
    CHECK(iterated_ito_at(g, {1, 1}, 0.25, 0.75) == iterated_ito(g, {1, 1}, 25, 75));
    CHECK_THROWS_AS((void)iterated_ito_at(g, {1}, 0.2501, 0.75), ValidationError);
    CHECK_THROWS_AS((void)iterated_ito_at(g, {1}, 0.25, 0.7437), ValidationError);
}

TEST_CASE("smooth path reproduces the calculus integrals") {
    const int M = 1000;
    const auto g = linear_grid(1.0, M);
    const double dt = g.dt();
    CHECK(std::abs(iterated_ito(g, {1}, 0, M) - 1.0) <= 1e-12);
    // Left Riemann sum of s ds: exactly (1 - dt)/2.
    const double q11 = iterated_ito(g, {1, 1}, 0, M);
    CHECK(std::abs(q11 - 0.5 * (1.0 - dt)) <= 1e-12);
    CHECK(q11 == doctest::Approx(0.5).epsilon(2e-3));
    CHECK(iterated_ito(g, {1, 1, 1}, 0, M) == doctest::Approx(1.0 / 6.0).epsilon(5e-3));
}

TEST_CASE("range and alphabet validation") {
    const auto g = brownian_grid(1.0, 64, 2, 1);
    CHECK_THROWS_AS((void)iterated_ito(g, {1}, 10, 5), ValidationError);
    CHECK_THROWS_AS((void)iterated_ito(g, {1}, 0, 65), ValidationError);
    CHECK_THROWS_AS((void)iterated_ito(g, {0}, 0, 64), ValidationError);
    CHECK_THROWS_AS((void)iterated_ito(g, {1, 3}, 0, 64), ValidationError);
    CHECK_THROWS_AS((void)signature_series(g, 0, 64, -1), ValidationError);
    CHECK_THROWS_AS(IteratedIntegralTable(g, -1, 2), ValidationError);
}

TEST_CASE("extension rebuilds the dropped level from the lower ones") {
    SUBCASE("smooth path, second level") {
        const auto g = linear_grid(1.0, 1000);
        const auto rep = extend_multiplicative(g, 2, 0, 1000, RefinementSchedule::dyadic);
        CHECK(std::abs(rep.series.level[2][0] - iterated_ito(g, {1, 1}, 0, 1000)) <= 1e-12);
        CHECK(rep.refinements <= 16);
        CHECK(rep.last_change < 1e-10);
    }
    SUBCASE("Brownian path, third level, both schedules") {
        const auto g = brownian_grid(1.0, 1024, 2, 2026);
        const auto dyadic = extend_multiplicative(g, 3, 0, 1024, RefinementSchedule::dyadic);
        const auto thirds = extend_multiplicative(g, 3, 0, 1024, RefinementSchedule::thirds);
        const auto direct = signature_series(g, 0, 1024, 3);
        for (std::size_t w = 0; w < direct.level[3].size(); ++w) {
            CHECK(std::abs(dyadic.series.level[3][w] - direct.level[3][w]) <= 1e-8);
            CHECK(std::abs(dyadic.series.level[3][w] - thirds.series.level[3][w]) <= 1e-9);
        }
        // Lower levels pass through untouched.
        for (int lev = 0; lev <= 2; ++lev)
            for (std::size_t w = 0; w < direct.level[lev].size(); ++w)
                CHECK(std::abs(dyadic.series.level[lev][w] - direct.level[lev][w]) <= 1e-12);
    }
    SUBCASE("window not aligned to powers of the schedule base") {
        const auto g = brownian_grid(1.0, 1024, 2, 6);
        const auto rep = extend_multiplicative(g, 2, 137, 901, RefinementSchedule::thirds);
        const auto direct = signature_series(g, 137, 901, 2);
        for (std::size_t w = 0; w < direct.level[2].size(); ++w)
            CHECK(std::abs(rep.series.level[2][w] - direct.level[2][w]) <= 1e-10);
    }
    SUBCASE("degenerate interval and invalid level") {
        const auto g = brownian_grid(1.0, 64, 1, 5);
        const auto rep = extend_multiplicative(g, 2, 10, 10, RefinementSchedule::dyadic);
        CHECK(rep.series.level[0][0] == 1.0);
        CHECK(rep.series.level[2][0] == 0.0);
        CHECK(rep.refinements == 0);
        CHECK_THROWS_AS(
            (void)extend_multiplicative(g, 1, 0, 64, RefinementSchedule::dyadic),
            ValidationError);
    }
    SUBCASE("reconstructed level obeys the fitted growth bound") {
        const auto g = brownian_grid(1.0, 1024, 2, 91);
        const auto fit = holder_constant_fit(g, 0.4, 3);
        REQUIRE(fit.recheck_ok);
        const auto rep = extend_multiplicative(g, 3, 0, 1024, RefinementSchedule::dyadic,
                                               fit.c_hat, 0.4);
        CHECK(rep.holder_ok);
        CHECK(rep.holder_margin >= 0.0);
    }
}

TEST_CASE("growth-constant fit bounds every sampled window") {
    SUBCASE("constant path has zero constant") {
        auto g = make_grid(1.0, 256, 1, 1); // Y identically zero
        const auto fit = holder_constant_fit(g, 0.4, 2);
        CHECK(fit.c_hat == 0.0);
        CHECK(fit.recheck_ok);
    }
    SUBCASE("smooth path") {
        const auto g = linear_grid(1.0, 512);
        const auto fit = holder_constant_fit(g, 0.4, 2);
        CHECK(fit.c_hat > 0.0);
        CHECK(fit.recheck_ok);
        // Spot-check the bound on the full window by hand.
        const double theta = theta_constant(1.0 / 0.4);
        CHECK(theta == fit.theta);
        for (int k = 1; k <= 2; ++k) {
            const double q = iterated_ito(g, MultiIndex(k, 1), 0, 512);
            const double bound =
                std::pow(fit.c_hat * 1.0, 0.4 * k) / (theta * fractional_factorial(0.4 * k));
            CHECK(std::abs(q) <= bound * (1.0 + 1e-10));
        }
    }
    SUBCASE("Brownian path, deeper fits dominate shallow ones") {
        const auto g = brownian_grid(1.0, 1024, 2, 313);
        const auto f1 = holder_constant_fit(g, 0.4, 1);
        const auto f3 = holder_constant_fit(g, 0.4, 3);
        CHECK(f1.recheck_ok);
        CHECK(f3.recheck_ok);
        CHECK(f3.c_hat >= f1.c_hat);
    }
    SUBCASE("roughness exponent must sit in (0,1)") {
        const auto g = brownian_grid(1.0, 64, 1, 2);
        CHECK_THROWS_AS((void)holder_constant_fit(g, 1.0, 2), ValidationError);
        CHECK_THROWS_AS((void)holder_constant_fit(g, 0.0, 2), ValidationError);
        CHECK_THROWS_AS((void)holder_constant_fit(g, 0.4, 0), ValidationError);
    }
}

TEST_CASE("matrix-coefficient series multiply associatively") {
    using M2 = Eigen::Matrix2d;
    const M2 one = M2::Identity();
    const M2 zero = M2::Zero();
    auto fill = [&](double base) {
        auto s = LevelSeries<M2>::unit(2, 2, one, zero);
        double v = base;
        for (int lev = 1; lev <= 2; ++lev)
            for (auto& m : s.level[lev]) {
                m << v, v + 0.1, v - 0.3, 0.5 * v;
                v += 0.7;
            }
        return s;
    };
    const auto a = fill(0.2), b = fill(-0.4), c = fill(1.1);
    const auto left = chen_product(chen_product(a, b), c);
    const auto right = chen_product(a, chen_product(b, c));
    for (int lev = 0; lev <= 2; ++lev)
        for (std::size_t w = 0; w < left.level[lev].size(); ++w)
            CHECK((left.level[lev][w] - right.level[lev][w]).cwiseAbs().maxCoeff() <= 1e-12);

    const auto unit = LevelSeries<M2>::unit(2, 2, one, zero);
    const auto ua = chen_product(unit, a);
    for (int lev = 0; lev <= 2; ++lev)
        for (std::size_t w = 0; w < ua.level[lev].size(); ++w)
            CHECK((ua.level[lev][w] - a.level[lev][w]).cwiseAbs().maxCoeff() == 0.0);

    auto bad = a;
    bad.depth = 1;
    bad.level.resize(2);
    CHECK_THROWS_AS((void)chen_product(a, bad), ValidationError);
}

} // TEST_SUITE
