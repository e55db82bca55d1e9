#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "rholab/errors.hpp"
#include "rholab/expansion.hpp"
#include "rholab/iterated_integrals.hpp"
#include "rholab/robust.hpp"

using namespace rholab;

namespace {

double sup_diff(const Vec& a, const Vec& b) { return (a - b).cwiseAbs().maxCoeff(); }

Vec steep_observable(const SpatialGrid& g) {
    return g.discretize([](const Vec& x) { return std::tanh(x[0] - 0.3); });
}

double fit_slope(const std::vector<double>& dts, const std::vector<double>& errs) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = static_cast<int>(errs.size());
    for (int i = 0; i < n; ++i) {
        const double x = std::log(dts[i]);
        const double y = std::log(errs[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Vec product_rule_psi(const SdeModel& model, const SpatialGrid& g, const SpMat& gen,
                     const Vec& h_w, const Vec& phi) {
    Vec out = (gen * h_w).cwiseProduct(phi);
    for (int i = 1; i <= model.d1; ++i)
        out += apply_first_order(model.V[static_cast<std::size_t>(i)], h_w, g)
                   .cwiseProduct(apply_first_order(model.V[static_cast<std::size_t>(i)], phi, g));
    return out;
}

} // namespace

TEST_SUITE("robust") {

TEST_CASE("product-rule operator vanishes for a constant sensor") {
    SdeModel model;
    model.name = "constant-sensor";
    model.N = 1;
    model.d1 = 1;
    model.d2 = 1;
    model.V.push_back(VectorField::scalar([](double x) { return -x; },
                                          [](double) { return -1.0; }));
    model.V.push_back(VectorField::constant(Vec::Ones(1)));
    model.h.push_back(ScalarField{[](const Vec&) { return 0.7; }, nullptr});
    model.validate();

    const SpatialGrid g(1, 201, 3.0);
    const GridSemigroup sg(model, g);
    const Vec phi = steep_observable(g);
    const Vec psi = psi_operator(model, sg, {1}, phi);
    CHECK(sup_norm(psi) <= 1e-10);
}

TEST_CASE("product-rule operator is the gradient for a linear sensor on Brownian motion") {
    SdeModel model;
    model.name = "bm-linear-sensor";
    model.N = 1;
    model.d1 = 1;
    model.d2 = 1;
    model.V.push_back(VectorField::zero(1));
    model.V.push_back(VectorField::constant(Vec::Ones(1)));
    model.h.push_back(ScalarField{[](const Vec& x) { return x(0); }, nullptr});
    model.validate();

    const SpatialGrid g(1, 201, 3.0);
    const GridSemigroup sg(model, g);
    const Vec phi = steep_observable(g);
    const Vec psi = psi_operator(model, sg, {1}, phi);
    const Vec grad = apply_first_order(model.V[1], phi, g);
    CHECK(sup_norm_interior(psi - grad, g, 2) <= 1e-9);
}

TEST_CASE("product-rule and commutator realisations agree at second order") {
    const SdeModel model = preset_by_name("ou-tanh");

    SUBCASE("cell-halving ratio is four") {
        std::vector<double> errs;
        for (int n : {1001, 2001, 4001}) {
            const SpatialGrid g(1, n, 3.0);
            const SpMat gen = assemble_generator(model.V, g);
            const Vec hf = g.discretize(model.h[0].value);
            const Vec phif = steep_observable(g);
            const Vec via_comm = psi_commutator(gen, hf, 1) * phif;
            const Vec via_prod = product_rule_psi(model, g, gen, hf, phif);
            errs.push_back(sup_norm_interior(via_comm - via_prod, g, 10));
        }
        CHECK(errs[0] / errs[1] == doctest::Approx(4.0).epsilon(0.08));
        CHECK(errs[1] / errs[2] == doctest::Approx(4.0).epsilon(0.08));
    }

    SUBCASE("identity holds to 1e-8 at interior points on a fine grid") {
        const SpatialGrid g(1, 20001, 3.0);
        const SpMat gen = assemble_generator(model.V, g);
        const Vec hf = g.discretize([](const Vec& x) { return std::tanh(0.5 * x(0)); });
        const Vec phif = g.discretize([](const Vec& x) { return std::sin(0.4 * x(0)); });
        const Vec via_comm = psi_commutator(gen, hf, 1) * phif;
        const Vec via_prod = product_rule_psi(model, g, gen, hf, phif);
        CHECK(sup_norm_interior(via_comm - via_prod, g, 10) <= 1e-8);
    }
}

TEST_CASE("commutator realisation satisfies the defining identity to roundoff") {
    const SdeModel model = preset_by_name("ou-tanh");
    const SpatialGrid g(1, 201, 3.0);
    const SpMat gen = assemble_generator(model.V, g);
    const Vec hf = g.discretize(model.h[0].value);
    const Vec phif = steep_observable(g);
    for (int k = 1; k <= 3; ++k) {
        Vec hk = Vec::Ones(g.size());
        for (int j = 0; j < k; ++j) hk = hk.cwiseProduct(hf);
        const Vec lhs = psi_commutator(gen, hf, k) * phif;
        const Vec rhs = gen * hk.cwiseProduct(phif) - hk.cwiseProduct(gen * phif);
        CHECK(sup_norm(lhs - rhs) <= 1e-12);
    }
}

TEST_CASE("sensor-word products feed the displayed formula") {
    SUBCASE("repeated letter equals the squared-sensor commutator") {
        const SdeModel model = preset_by_name("ou-tanh");
        const SpatialGrid g(1, 4001, 3.0);
        const GridSemigroup sg(model, g, nullptr, SemigroupOptions{0, 1e-3});
        const Vec phi = steep_observable(g);
        const Vec h1 = g.discretize(model.h[0].value);
        const Vec via_word = psi_operator(model, sg, {1, 1}, phi);
        const Vec via_comm = psi_commutator(sg.generator(), h1, 2) * phi;
        CHECK(sup_norm_interior(via_word - via_comm, g, 10) <= 1e-5);
    }

    SUBCASE("mixed two-channel word uses the product of the sensors") {
        SdeModel model;
        model.name = "two-channel";
        model.N = 1;
        model.d1 = 1;
        model.d2 = 2;
        model.V.push_back(VectorField::scalar([](double x) { return -x; },
                                              [](double) { return -1.0; }));
        model.V.push_back(VectorField::constant(Vec::Ones(1)));
        model.h.push_back(ScalarField{[](const Vec& x) { return std::sin(x(0)); }, nullptr});
        model.h.push_back(ScalarField{[](const Vec& x) { return std::cos(x(0)); }, nullptr});
        model.validate();

        const SpatialGrid g(1, 4001, 3.0);
        const GridSemigroup sg(model, g, nullptr, SemigroupOptions{0, 1e-3});
        const Vec phi = steep_observable(g);
        const Vec prod =
            g.discretize([](const Vec& x) { return std::sin(x(0)) * std::cos(x(0)); });
        const Vec via_word = psi_operator(model, sg, {1, 2}, phi);
        const Vec via_comm = psi_commutator(sg.generator(), prod, 1) * phi;
        CHECK(sup_norm_interior(via_word - via_comm, g, 10) <= 1e-5);
    }
}

TEST_CASE("term fixtures carry the advertised shapes") {
    CHECK(ibp_terms(1).size() == 2);
    CHECK(ibp_terms(2).size() == 5);
    CHECK(ibp_terms(3).size() == 14);

    std::set<std::string> ids;
    for (int level = 1; level <= 3; ++level) {
        CHECK(degree_audit(ibp_terms(level)));
        for (const IbpTerm& term : ibp_terms(level)) {
            CHECK(term.level == level);
            CHECK(std::abs(term.sign) == 1.0);
            ids.insert(term.id);
        }
    }
    CHECK(ids.size() == 2 + 5 + 14);

    CHECK(degree_audit({}));

    std::vector<IbpTerm> tampered = ibp_terms(2);
    tampered[1].stages[0].q_weights[0] = 1; // degree drops below the level
    CHECK_FALSE(degree_audit(tampered));
}

TEST_CASE("labels render the operator chain") {
    const auto& level1 = ibp_terms(1);
    CHECK(ibp_term_label(level1[0]) == "+ q1(s,t) P (h^1 phi)");
    CHECK(ibp_term_label(level1[1]) == "- INT[q1] P Psi1 P phi");
    const auto& level3 = ibp_terms(3);
    const std::string last = ibp_term_label(level3.back());
    CHECK(last.substr(0, 1) == "-");
    std::size_t count = 0;
    for (std::size_t pos = last.find("Psi1"); pos != std::string::npos;
         pos = last.find("Psi1", pos + 1))
        ++count;
    CHECK(count == 3);
}

TEST_CASE("zero observation path gives identically zero values") {
    const SdeModel model = preset_by_name("ou-tanh");
    const SpatialGrid g(1, 101, 3.0);
    const GridSemigroup sg(model, g);
    const Vec h_grid = g.discretize(model.h[0].value);
    const Vec phi = steep_observable(g);
    const PathGrid grid = make_grid(0.25, 64, model.d1, model.d2);
    for (int level = 1; level <= 3; ++level) {
        const Vec v = ibp_level_value(sg, h_grid, grid, phi, level, 0, grid.M);
        CHECK(sup_norm(v) == 0.0);
    }
}

TEST_CASE("unit sensor collapses to the iterated integral times the flow") {
    const SdeModel model = preset_by_name("ou-tanh");
    const SpatialGrid g(1, 101, 3.0);
    const GridSemigroup sg(model, g);
    const Vec ones = Vec::Ones(g.size());
    const Vec phi = steep_observable(g);
    PathGrid grid = make_grid(0.25, 128, model.d1, model.d2);
    fill_brownian_observation(grid, 99, 3);

    Vec flow = phi;
    for (int k = 0; k < grid.M; ++k) flow = sg.apply(grid.dt(), flow);

    for (int level = 1; level <= 3; ++level) {
        const Vec v = ibp_level_value(sg, ones, grid, phi, level, 0, grid.M);
        const MultiIndex word(static_cast<std::size_t>(level), 1);
        const double q = iterated_ito(grid, word, 0, grid.M);
        const double scale = 1.0 + std::abs(q) * sup_norm(flow);
        CHECK(sup_diff(v, q * flow) <= 1e-13 * scale);
    }
}

TEST_CASE("per-term values sum to the level value") {
    const SdeModel model = preset_by_name("ou-tanh");
    const SpatialGrid g(1, 101, 3.0);
    const GridSemigroup sg(model, g);
    const Vec h_grid = g.discretize(model.h[0].value);
    const Vec phi = steep_observable(g);
    PathGrid grid = make_grid(0.25, 64, model.d1, model.d2);
    fill_brownian_observation(grid, 7, 1);

    const std::vector<Vec> parts = ibp_term_values(sg, h_grid, grid, phi, 3, 0, grid.M);
    REQUIRE(parts.size() == 14);
    Vec acc = Vec::Zero(g.size());
    for (const Vec& part : parts) acc += part;
    CHECK(sup_diff(acc, ibp_level_value(sg, h_grid, grid, phi, 3, 0, grid.M)) == 0.0);

    // a single term evaluated on its own matches its entry in the list
    const Vec alone = ibp_term_value(ibp_terms(3)[3], sg, h_grid, grid, phi, 0, grid.M);
    CHECK(sup_diff(alone, parts[3]) == 0.0);
}

TEST_CASE("pathwise values converge to the direct left-point expansion at first order") {
    const SdeModel model = preset_by_name("ou-tanh");
    const SpatialGrid g(1, 101, 3.0);
    const GridSemigroup sg(model, g);
    const Vec h_grid = g.discretize(model.h[0].value);
    const Vec phi = steep_observable(g);

    for (unsigned seed : {42u, 101u}) {
        CAPTURE(seed);
        PathGrid master = make_grid(0.25, 256, model.d1, model.d2);
        fill_brownian_observation(master, seed, 3);
        for (int level = 1; level <= 3; ++level) {
            CAPTURE(level);
            std::vector<double> errs, dts;
            for (int factor : {8, 4, 2, 1}) {
                const PathGrid grid = coarsen(master, factor);
                const Vec direct = level_sums(sg, {h_grid}, grid, phi, level, 0, grid.M).back();
                const Vec pathwise = ibp_level_value(sg, h_grid, grid, phi, level, 0, grid.M);
                errs.push_back(sup_diff(direct, pathwise));
                dts.push_back(grid.dt());
            }
            for (std::size_t j = 1; j < errs.size(); ++j) CHECK(errs[j] < errs[j - 1]);
            CHECK(fit_slope(dts, errs) >= 0.9);
        }
    }
}

TEST_CASE("a uniform path perturbation shifts values linearly") {
    const SdeModel model = preset_by_name("ou-tanh");
    const SpatialGrid g(1, 101, 3.0);
    const GridSemigroup sg(model, g);
    const Vec h_grid = g.discretize(model.h[0].value);
    const Vec phi = steep_observable(g);
    PathGrid grid = make_grid(0.25, 128, model.d1, model.d2);
    fill_brownian_observation(grid, 99, 3);
    PathGrid shape = make_grid(0.25, 128, model.d1, model.d2);
    fill_brownian_observation(shape, 100, 5);
    shape.Y /= shape.Y.cwiseAbs().maxCoeff(); // sup-norm one direction

    for (int level = 1; level <= 3; ++level) {
        CAPTURE(level);
        const Vec base = ibp_level_value(sg, h_grid, grid, phi, level, 0, grid.M);
        std::vector<double> shift;
        for (double eps : {1e-3, 1e-4}) {
            PathGrid pert = grid;
            pert.Y += eps * shape.Y;
            const Vec out = ibp_level_value(sg, h_grid, pert, phi, level, 0, pert.M);
            shift.push_back(sup_diff(out, base));
            CHECK(shift.back() <= 2.0 * eps);
        }
        CHECK(shift[0] / shift[1] == doctest::Approx(10.0).epsilon(0.02));
    }
}

TEST_CASE("argument validation") {
    const SdeModel model = preset_by_name("ou-tanh");
    const SpatialGrid g(1, 101, 3.0);
    const GridSemigroup sg(model, g);
    const Vec h_grid = g.discretize(model.h[0].value);
    const Vec phi = steep_observable(g);
    PathGrid grid = make_grid(0.25, 64, model.d1, model.d2);
    fill_brownian_observation(grid, 5, 0);

    CHECK_THROWS_AS((void)ibp_terms(0), ValidationError);
    CHECK_THROWS_AS((void)ibp_terms(4), ValidationError);
    CHECK_THROWS_AS((void)ibp_level_value(sg, h_grid, grid, phi, 0, 0, grid.M),
                    ValidationError);
    CHECK_THROWS_AS((void)ibp_level_value(sg, h_grid, grid, phi, 1, 10, 10), ValidationError);
    CHECK_THROWS_AS((void)ibp_level_value(sg, h_grid, grid, phi, 1, 0, grid.M + 1),
                    ValidationError);
    CHECK_THROWS_AS((void)ibp_level_value(sg, h_grid, grid, Vec::Ones(7), 1, 0, grid.M),
                    ValidationError);
    CHECK_THROWS_AS((void)ibp_level_value(sg, Vec::Ones(7), grid, phi, 1, 0, grid.M),
                    ValidationError);

    PathGrid two_channel = make_grid(0.25, 64, 1, 2);
    fill_brownian_observation(two_channel, 5, 0);
    CHECK_THROWS_AS((void)ibp_level_value(sg, h_grid, two_channel, phi, 1, 0, 64),
                    ValidationError);

    CHECK_THROWS_AS((void)psi_commutator(sg.generator(), h_grid, 0), ValidationError);
    CHECK_THROWS_AS((void)psi_commutator(sg.generator(), Vec::Ones(7), 1), ValidationError);
    CHECK_THROWS_AS((void)psi_operator(model, sg, {}, phi), ValidationError);
    CHECK_THROWS_AS((void)psi_operator(model, sg, {2}, phi), ValidationError);
    CHECK_THROWS_AS((void)psi_operator(model, sg, {0}, phi), ValidationError);
    CHECK_THROWS_AS((void)psi_operator(model, sg, {1}, Vec::Ones(7)), ValidationError);

    IbpTerm bad;
    bad.level = 1;
    bad.stages.push_back(IbpStage{{}, 1, 0}); // no integrand coefficient
    CHECK_THROWS_AS((void)ibp_term_value(bad, sg, h_grid, grid, phi, 0, grid.M),
                    ValidationError);
    IbpTerm negative;
    negative.level = 1;
    negative.outer_q = {1};
    negative.terminal_h = -1;
    CHECK_THROWS_AS((void)ibp_term_value(negative, sg, h_grid, grid, phi, 0, grid.M),
                    ValidationError);
}

} // TEST_SUITE
