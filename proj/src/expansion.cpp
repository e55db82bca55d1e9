#include "rholab/expansion.hpp"

#include <algorithm>
#include <cmath>

#include "rholab/errors.hpp"

namespace rholab {

namespace {

void check_window(const PathGrid& grid, int s_idx, int t_idx) {
    if (s_idx < 0 || t_idx > grid.M || s_idx > t_idx)
        throw ValidationError("expansion: window indices out of range");
}

void check_inputs(const GridSemigroup& sg, const std::vector<Vec>& sensors, const PathGrid& grid,
                  const Vec& phi, int levels, int s_idx, int t_idx) {
    check_window(grid, s_idx, t_idx);
    if (levels < 0) throw ValidationError("expansion: level count must be nonnegative");
    const long n = sg.grid().size();
    if (phi.size() != n) throw ValidationError("expansion: observable size does not match grid");
    if (static_cast<int>(sensors.size()) != grid.d2())
        throw ValidationError("expansion: one sensor per observation channel required");
    for (const Vec& s : sensors)
        if (s.size() != n) throw ValidationError("expansion: sensor size does not match grid");
}

ExpansionResult package_levels(std::vector<Vec> levels) {
    ExpansionResult result;
    result.levels = std::move(levels);
    result.partial_sums.reserve(result.levels.size());
    result.level_sup.reserve(result.levels.size());
    Vec running = Vec::Zero(result.levels.front().size());
    for (const Vec& lv : result.levels) {
        running += lv;
        result.partial_sums.push_back(running);
        result.level_sup.push_back(sup_norm(lv));
    }
    return result;
}

} // namespace

std::vector<Vec> discretize_sensors(const SdeModel& model, const SpatialGrid& grid) {
    std::vector<Vec> out;
    out.reserve(model.h.size());
    for (const auto& sensor : model.h) out.push_back(grid.discretize(sensor.value));
    return out;
}

std::vector<Vec> level_sums(const GridSemigroup& sg, const std::vector<Vec>& sensors,
                            const PathGrid& grid, const Vec& phi, int levels, int s_idx,
                            int t_idx) {
    check_inputs(sg, sensors, grid, phi, levels, s_idx, t_idx);
    const double dt = grid.dt();
    const int d2 = grid.d2();

    // W[j](u) = sum over words of length j of the iterated operator sum over
    // left points in [u, t); terminal data W[0] = phi, W[j>0] = 0.
    std::vector<Vec> w(static_cast<size_t>(levels) + 1, Vec::Zero(phi.size()));
    w[0] = phi;
    std::vector<Vec> pw(w.size());
    for (int k = t_idx - 1; k >= s_idx; --k) {
        for (size_t j = 0; j < w.size(); ++j) pw[j] = sg.apply(dt, w[j]);
        w[0] = pw[0];
        for (int j = levels; j >= 1; --j) {
            w[j] = pw[j];
            for (int i = 0; i < d2; ++i) {
                const double dy = grid.dY(k, i);
                if (dy != 0.0) w[j] += dy * sensors[i].cwiseProduct(pw[j - 1]);
            }
        }
    }
    return w;
}

Vec word_operator_value(const GridSemigroup& sg, const std::vector<Vec>& sensors,
                        const PathGrid& grid, const Vec& phi, const MultiIndex& word, int s_idx,
                        int t_idx) {
    const int m = static_cast<int>(word.size());
    if (m < 1) throw ValidationError("expansion: word must be nonempty");
    check_inputs(sg, sensors, grid, phi, m, s_idx, t_idx);
    for (int letter : word)
        if (letter < 1 || letter > grid.d2())
            throw ValidationError("expansion: word letter outside observation channels");

    const double dt = grid.dt();
    // T[j](u) carries the tail of the word from position j+1 onward; T[m] is
    // the plain backward flow of phi, the others start from zero at t.
    std::vector<Vec> t(static_cast<size_t>(m) + 1, Vec::Zero(phi.size()));
    t[m] = phi;
    std::vector<Vec> pt(t.size());
    for (int k = t_idx - 1; k >= s_idx; --k) {
        for (size_t j = 0; j < t.size(); ++j) pt[j] = sg.apply(dt, t[j]);
        t[m] = pt[m];
        for (int j = m - 1; j >= 0; --j) {
            const int channel = word[static_cast<size_t>(j)] - 1;
            t[j] = pt[j] + grid.dY(k, channel) * sensors[channel].cwiseProduct(pt[j + 1]);
        }
    }
    return t[0];
}

ExpansionResult truncated_expansion(const GridSemigroup& sg, const std::vector<Vec>& sensors,
                                    const PathGrid& grid, const Vec& phi, int truncation_level,
                                    int s_idx, int t_idx) {
    return package_levels(level_sums(sg, sensors, grid, phi, truncation_level, s_idx, t_idx));
}

std::vector<Vec> adjoint_level_sums(const GridSemigroup& sg, const std::vector<Vec>& sensors,
                                    const PathGrid& grid, const Vec& psi, int levels, int s_idx,
                                    int t_idx) {
    check_inputs(sg, sensors, grid, psi, levels, s_idx, t_idx);
    const double dt = grid.dt();
    const int d2 = grid.d2();

    std::vector<Vec> z(static_cast<size_t>(levels) + 1, Vec::Zero(psi.size()));
    z[0] = psi;
    for (int k = s_idx; k < t_idx; ++k) {
        // Descending order keeps z[j-1] at the previous time while z[j] updates.
        for (int j = levels; j >= 1; --j) {
            Vec acc = z[j];
            for (int i = 0; i < d2; ++i) {
                const double dy = grid.dY(k, i);
                if (dy != 0.0) acc += dy * sensors[i].cwiseProduct(z[j - 1]);
            }
            z[j] = sg.apply_transpose(dt, acc);
        }
        z[0] = sg.apply_transpose(dt, z[0]);
    }
    return z;
}

ExpansionResult adjoint_truncated_expansion(const GridSemigroup& sg,
                                            const std::vector<Vec>& sensors, const PathGrid& grid,
                                            const Vec& psi, int truncation_level, int s_idx,
                                            int t_idx) {
    return package_levels(
        adjoint_level_sums(sg, sensors, grid, psi, truncation_level, s_idx, t_idx));
}

DualityReport duality_check(const GridSemigroup& sg, const std::vector<Vec>& sensors,
                            const PathGrid& grid, const Vec& phi, const Vec& psi, int levels,
                            int s_idx, int t_idx) {
    const std::vector<Vec> fwd = level_sums(sg, sensors, grid, phi, levels, s_idx, t_idx);
    const std::vector<Vec> adj = adjoint_level_sums(sg, sensors, grid, psi, levels, s_idx, t_idx);

    DualityReport report;
    report.per_level.resize(fwd.size());
    double lhs_sum = 0.0;
    double rhs_sum = 0.0;
    for (size_t j = 0; j < fwd.size(); ++j) {
        const double lhs = psi.dot(fwd[j]);
        const double rhs = adj[j].dot(phi);
        lhs_sum += lhs;
        rhs_sum += rhs;
        report.per_level[j] = std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
        report.max_residual = std::max(report.max_residual, report.per_level[j]);
    }
    report.summed = std::abs(lhs_sum - rhs_sum) / std::max(1.0, std::abs(lhs_sum));
    report.max_residual = std::max(report.max_residual, report.summed);
    return report;
}

namespace {

/// 32 smooth probe functions: 16 off-centre bumps at two widths and 16 plane
/// waves at eight frequencies, all with sup norm 1.
std::vector<Vec> probe_dictionary(const SpatialGrid& grid) {
    if (grid.N != 1)
        throw ValidationError("operator_norm_decay: probe dictionary is one-dimensional");
    std::vector<Vec> dict;
    dict.reserve(32);
    const double L = grid.L;
    for (int c = 0; c < 8; ++c) {
        const double centre = -0.5 * L + c * (L / 7.0);
        for (double width : {L / 4.0, L / 8.0}) {
            dict.push_back(grid.discretize([centre, width](const Vec& x) {
                const double u = (x[0] - centre) / width;
                return std::exp(-u * u);
            }));
        }
    }
    const double pi = 3.14159265358979323846;
    for (int k = 1; k <= 8; ++k) {
        const double omega = k * pi / L;
        dict.push_back(grid.discretize([omega](const Vec& x) { return std::sin(omega * x[0]); }));
        dict.push_back(grid.discretize([omega](const Vec& x) { return std::cos(omega * x[0]); }));
    }
    return dict;
}

} // namespace

namespace {

/// Block version of the level recursion: every column of `dict` is propagated
/// at once, returning the level-`level` responses as columns.
Mat level_block(const GridSemigroup& sg, const std::vector<Vec>& sensors, const PathGrid& grid,
                const Mat& dict, int level, int s_idx, int t_idx) {
    const double dt = grid.dt();
    const int d2 = grid.d2();
    std::vector<Mat> w(static_cast<size_t>(level) + 1, Mat::Zero(dict.rows(), dict.cols()));
    w[0] = dict;
    std::vector<Mat> pw(w.size());
    for (int k = t_idx - 1; k >= s_idx; --k) {
        for (size_t j = 0; j < w.size(); ++j) pw[j] = sg.apply_block(dt, w[j]);
        w[0] = pw[0];
        for (int j = level; j >= 1; --j) {
            w[j] = pw[j];
            for (int i = 0; i < d2; ++i) {
                const double dy = grid.dY(k, i);
                if (dy != 0.0) w[j] += dy * (sensors[i].asDiagonal() * pw[j - 1]);
            }
        }
    }
    return w[static_cast<size_t>(level)];
}

} // namespace

NormDecayReport operator_norm_decay(const SdeModel& model, const GridSemigroup& sg,
                                    const PathGrid& grid, int level, double gamma, int base_steps,
                                    int n_scales, int s_idx, int max_windows, int margin_cells) {
    if (level < 1 || level > 4)
        throw ValidationError("operator_norm_decay: word length must be 1..4");
    if (!(gamma > 0.0) || !(gamma < 1.0))
        throw ValidationError("operator_norm_decay: exponent must lie in (0, 1)");
    if (n_scales < 4)
        throw ValidationError(
            "operator_norm_decay: need at least four interval scales for the fit");
    if (max_windows < 1) throw ValidationError("operator_norm_decay: need at least one window");
    if (base_steps < 1 || base_steps % (1 << (n_scales - 1)) != 0)
        throw ValidationError(
            "operator_norm_decay: largest window must halve n_scales - 1 times");
    check_window(grid, s_idx, s_idx + base_steps);

    const std::vector<Vec> sensors = discretize_sensors(model, sg.grid());
    if (static_cast<int>(sensors.size()) != grid.d2())
        throw ValidationError("operator_norm_decay: model channels do not match the path");
    const std::vector<Vec> dict = probe_dictionary(sg.grid());
    Mat dict_block(sg.grid().size(), static_cast<long>(dict.size()));
    std::vector<double> dict_norm;
    dict_norm.reserve(dict.size());
    for (size_t q = 0; q < dict.size(); ++q) {
        dict_block.col(static_cast<long>(q)) = dict[q];
        const double nrm = h1_norm(model.V, model.ufg_ell, dict[q], sg.grid(), margin_cells);
        if (!(nrm > 0.0)) throw NumericalGuardError("operator_norm_decay: flat probe function");
        dict_norm.push_back(nrm);
    }

    NormDecayReport report;
    report.target = level * gamma - 0.1;
    for (int r = 1; r <= n_scales; ++r) {
        const int len = base_steps >> (r - 1);
        const int n_windows = std::min((grid.M - s_idx) / len, max_windows);
        // Disjoint windows spread evenly over the whole path, so every scale
        // samples the same stretch of observation.
        const int stride = (grid.M - s_idx) / n_windows;
        double mean = 0.0;
        for (int jw = 0; jw < n_windows; ++jw) {
            const int a = s_idx + jw * stride;
            const Mat resp = level_block(sg, sensors, grid, dict_block, level, a, a + len);
            double sup = 0.0;
            for (size_t q = 0; q < dict.size(); ++q)
                sup = std::max(sup, h1_norm(model.V, model.ufg_ell,
                                            Vec(resp.col(static_cast<long>(q))), sg.grid(),
                                            margin_cells) /
                                        dict_norm[q]);
            mean += sup;
        }
        mean /= n_windows;
        if (!std::isfinite(mean))
            throw NumericalGuardError("operator_norm_decay: non-finite dictionary response");
        report.lengths.push_back(len * grid.dt());
        report.ratios.push_back(mean);
    }

    if (std::all_of(report.ratios.begin(), report.ratios.end(),
                    [](double r) { return r == 0.0; })) {
        report.trivial = true; // e.g. a flat observation path or a zero sensor
        return report;
    }
    for (double r : report.ratios)
        if (!(r > 0.0))
            throw NumericalGuardError(
                "operator_norm_decay: mixed zero and nonzero responses, fit is degenerate");

    // Least-squares slope of log ratio against log window length.
    const size_t m = report.lengths.size();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < m; ++i) {
        const double x = std::log(report.lengths[i]);
        const double y = std::log(report.ratios[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = m * sxx - sx * sx;
    if (std::abs(denom) < 1e-12)
        throw NumericalGuardError("operator_norm_decay: degenerate abscissae in the fit");
    report.slope = (m * sxy - sx * sy) / denom;
    report.pass = report.slope >= report.target;
    return report;
}

} // namespace rholab
