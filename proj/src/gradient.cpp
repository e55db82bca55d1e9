#include "rholab/gradient.hpp"

#include <cmath>
#include <cstdlib>

#include "rholab/errors.hpp"

namespace rholab {

namespace {

void check_word(const MultiIndex& word, int d1, const char* which) {
    for (int letter : word)
        if (letter < 0 || letter > d1)
            throw ValidationError(std::string("gradient harness: ") + which +
                                  " letter outside 0..d1");
}

/// Rightmost letter acts first, as in an operator composition D_a1 ... D_ak.
Vec apply_word(const SdeModel& model, const SpatialGrid& grid, const MultiIndex& word,
               Vec f) {
    for (auto it = word.rbegin(); it != word.rend(); ++it)
        f = apply_first_order(model.V[static_cast<std::size_t>(*it)], f, grid);
    return f;
}

int word_weight(const MultiIndex& word) { return word.empty() ? 0 : degree(word); }

int path_index_of(const PathGrid& path, double t) {
    const double dt = path.dt();
    const auto k = static_cast<int>(std::llround(t / dt));
    if (k < 1 || k > path.M || std::abs(k * dt - t) > 1e-9 * std::max(t, dt))
        throw ValidationError("gradient harness: fit times must lie on the observation grid");
    return k;
}

double fit_slope(const std::vector<double>& times, const std::vector<double>& norms) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = static_cast<int>(times.size());
    for (int i = 0; i < n; ++i) {
        const double x = std::log(times[i]);
        const double y = std::log(norms[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace

ExponentReport gradient_exponent_fit(const SdeModel& model, const GridSemigroup& sg,
                                     GradientTarget target, const MultiIndex& alpha,
                                     const MultiIndex& beta, const Vec& phi,
                                     const std::vector<double>& times,
                                     const PathGrid* path, int levels) {
    const SpatialGrid& grid = sg.grid();
    check_word(alpha, model.d1, "alpha");
    check_word(beta, model.d1, "beta");
    if (phi.size() != grid.size())
        throw ValidationError("gradient harness: phi size mismatch");
    if (times.size() < 5)
        throw ValidationError("gradient harness: need at least 5 time scales");
    for (std::size_t j = 0; j < times.size(); ++j) {
        if (times[j] <= 0.0)
            throw ValidationError("gradient harness: times must be positive");
        if (j > 0 && times[j] >= times[j - 1])
            throw ValidationError("gradient harness: times must be strictly decreasing");
    }
    if (target != GradientTarget::heat) {
        if (path == nullptr)
            throw ValidationError("gradient harness: rho/pi targets need an observation path");
        path->validate();
        if (path->d2() != model.d2)
            throw ValidationError("gradient harness: path channel count mismatch");
        if (levels < 0) throw ValidationError("gradient harness: negative level count");
    }

    const Vec psi = apply_word(model, grid, beta, phi);
    std::vector<Vec> sensors;
    if (target != GradientTarget::heat) sensors = discretize_sensors(model, grid);

    ExponentReport report;
    report.target = target;
    report.alpha = alpha;
    report.beta = beta;
    report.times = times;
    report.theoretical = -0.5 * (word_weight(alpha) + word_weight(beta));

    const bool plain = alpha.empty() && beta.empty();
    for (double t : times) {
        Vec value;
        switch (target) {
            case GradientTarget::heat: value = sg.apply(t, psi); break;
            case GradientTarget::rho: {
                const int k = path_index_of(*path, t);
                value = truncated_expansion(sg, sensors, *path, psi, levels, 0, k).truncation();
                break;
            }
            case GradientTarget::pi: {
                const int k = path_index_of(*path, t);
                const Vec num =
                    truncated_expansion(sg, sensors, *path, psi, levels, 0, k).truncation();
                const Vec mass = truncated_expansion(sg, sensors, *path,
                                                     Vec::Ones(grid.size()), levels, 0, k)
                                     .truncation();
                if (mass.minCoeff() < 1e-12)
                    throw NumericalGuardError(
                        "gradient harness: filter mass below 1e-12 on the grid");
                value = num.cwiseQuotient(mass);
                break;
            }
        }
        const Vec field = apply_word(model, grid, alpha, std::move(value));
        const double full = sup_norm(field);
        const double interior = sup_norm_interior(field, grid, 10);
        if (!plain && full > interior * (1.0 + 1e-12))
            throw NumericalGuardError(
                "gradient harness: boundary-layer contamination (sup attained only near "
                "the boundary)");
        const double norm = plain ? full : interior;
        if (norm < 1e-12)
            throw NumericalGuardError("gradient harness: vacuous fit (norms below 1e-12)");
        report.sup_norms.push_back(norm);
    }

    report.slope = fit_slope(report.times, report.sup_norms);
    report.margin = report.slope - (report.theoretical - 0.1);
    report.pass = report.margin >= 0.0;
    return report;
}

double normalised_quotient_check(const SdeModel& model, const GridSemigroup& sg,
                                 const MultiIndex& alpha, const MultiIndex& beta,
                                 const Vec& phi, const PathGrid& path, int t_idx,
                                 int levels) {
    const SpatialGrid& grid = sg.grid();
    if (alpha.size() != 1)
        throw ValidationError(
            "quotient-rule check: the identity is first order, alpha must be one letter");
    check_word(alpha, model.d1, "alpha");
    check_word(beta, model.d1, "beta");
    if (phi.size() != grid.size())
        throw ValidationError("quotient-rule check: phi size mismatch");
    path.validate();
    if (path.d2() != model.d2)
        throw ValidationError("quotient-rule check: path channel count mismatch");
    if (t_idx < 1 || t_idx > path.M)
        throw ValidationError("quotient-rule check: time index outside the path grid");
    if (levels < 0) throw ValidationError("quotient-rule check: negative level count");

    const Vec psi = apply_word(model, grid, beta, phi);
    const std::vector<Vec> sensors = discretize_sensors(model, grid);
    const Vec rho_phi =
        truncated_expansion(sg, sensors, path, psi, levels, 0, t_idx).truncation();
    const Vec rho_one = truncated_expansion(sg, sensors, path, Vec::Ones(grid.size()),
                                            levels, 0, t_idx)
                            .truncation();
    if (rho_one.minCoeff() < 1e-12)
        throw NumericalGuardError("quotient-rule check: filter mass below 1e-12 on the grid");

    const Vec pi = rho_phi.cwiseQuotient(rho_one);
    const Vec lhs = apply_word(model, grid, alpha, pi);
    const Vec rhs = (apply_word(model, grid, alpha, rho_phi).cwiseProduct(rho_one) -
                     rho_phi.cwiseProduct(apply_word(model, grid, alpha, rho_one)))
                        .cwiseQuotient(rho_one.cwiseProduct(rho_one));
    return sup_norm_interior(lhs - rhs, grid, 10);
}

} // namespace rholab
