#include "rholab/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rholab/rng.hpp"

namespace rholab {

namespace {

void check_mc_args(const SdeModel& model, const Vec& x0, const PathGrid& grid, int n_paths) {
    model.validate();
    grid.validate();
    if (x0.size() != model.N) throw ValidationError("filter MC: x0 dimension mismatch");
    if (grid.d2() != model.d2)
        throw ValidationError("filter MC: observation grid channel count mismatch");
    if (n_paths < 1) throw ValidationError("filter MC: need a positive path count");
}

[[noreturn]] void weight_overflow() {
    throw NumericalGuardError(
        "filter MC: |log Z| exceeded 700 on a path; the weight would overflow");
}

} // namespace

std::vector<RhoResult> rho_mc_multi(const SdeModel& model, const Vec& x0, const PathGrid& grid,
                                    const std::vector<std::function<double(const Vec&)>>& phis,
                                    int n_paths, std::uint64_t seed, std::uint64_t stream_base) {
    check_mc_args(model, x0, grid, n_paths);

    const int M = grid.M;
    const int d2 = model.d2;
    const double dt = grid.dt();
    const double sdt = std::sqrt(dt);
    const std::size_t n_phi = phis.size();

    // Local copy of the increments: tight loops should not re-difference Y.
    Eigen::MatrixXd dy(M, d2);
    for (int k = 0; k < M; ++k)
        for (int i = 0; i < d2; ++i) dy(k, i) = grid.dY(k, i);

    double sum_w = 0.0, sum_w2 = 0.0;
    std::vector<double> sum_vw(n_phi, 0.0), sum_vw2(n_phi, 0.0), sum_vww(n_phi, 0.0);
    Vec xv(model.N);

    const bool fast = model.N == 1 && model.d1 == 1 && model.scalar_loop().valid &&
                      static_cast<int>(model.scalar_loop().sensors.size()) == d2;
    const VectorField b = fast ? VectorField() : model.ito_drift();

    for (int p = 0; p < n_paths; ++p) {
        Rng rng(seed, stream_base + static_cast<std::uint64_t>(p));
        double logz = 0.0;
        if (fast) {
            const auto& f = model.scalar_loop();
            double x = x0[0];
            for (int k = 0; k < M; ++k) {
                for (int i = 0; i < d2; ++i) {
                    const double hi = f.sensors[i](x);
                    logz += hi * dy(k, i) - 0.5 * hi * hi * dt;
                }
                x += f.drift(x) * dt + f.vol(x) * (sdt * rng.normal());
            }
            xv[0] = x;
        } else {
            Vec x = x0;
            for (int k = 0; k < M; ++k) {
                for (int i = 0; i < d2; ++i) {
                    const double hi = model.h[i](x);
                    logz += hi * dy(k, i) - 0.5 * hi * hi * dt;
                }
                Vec incr = b(x) * dt;
                for (int j = 1; j <= model.d1; ++j)
                    incr += model.V[j](x) * (sdt * rng.normal());
                x += incr;
            }
            xv = x;
        }
        if (!(std::abs(logz) <= 700.0)) weight_overflow();
        const double w = std::exp(logz);
        sum_w += w;
        sum_w2 += w * w;
        for (std::size_t q = 0; q < n_phi; ++q) {
            const double vw = phis[q](xv) * w;
            sum_vw[q] += vw;
            sum_vw2[q] += vw * vw;
            sum_vww[q] += vw * w;
        }
    }

    const double inv_n = 1.0 / n_paths;
    const double mass = sum_w * inv_n;
    const double mass_var = std::max(0.0, sum_w2 * inv_n - mass * mass);
    std::vector<RhoResult> out(n_phi);
    for (std::size_t q = 0; q < n_phi; ++q) {
        RhoResult& r = out[q];
        r.n_paths = n_paths;
        r.value = sum_vw[q] * inv_n;
        r.stderr_ = std::sqrt(
            std::max(0.0, sum_vw2[q] * inv_n - r.value * r.value) * inv_n);
        r.mass = mass;
        r.mass_stderr = std::sqrt(mass_var * inv_n);
        r.normalised = r.value / mass;
        // Delta method for the quotient: Var ~ E[(vw - pi w)^2] / (n mass^2).
        const double quad = std::max(
            0.0, inv_n * (sum_vw2[q] - 2.0 * r.normalised * sum_vww[q] +
                          r.normalised * r.normalised * sum_w2));
        r.normalised_stderr = std::sqrt(quad * inv_n) / mass;
    }
    return out;
}

RhoResult rho_mc(const SdeModel& model, const Vec& x0, const PathGrid& grid,
                 const std::function<double(const Vec&)>& phi, int n_paths, std::uint64_t seed,
                 std::uint64_t stream_base) {
    return rho_mc_multi(model, x0, grid, {phi}, n_paths, seed, stream_base)[0];
}

KalmanBucyResult kalman_bucy_oracle(double a, double sigma, const PathGrid& grid, double m0,
                                    double p0) {
    grid.validate();
    if (p0 < 0.0) throw ValidationError("kalman_bucy_oracle: variance must be non-negative");
    const int M = grid.M;
    const double dt = grid.dt();
    KalmanBucyResult out;
    out.mean.resize(M + 1);
    out.variance.resize(M + 1);
    double m = m0, p = p0;
    out.mean[0] = m;
    out.variance[0] = p;
    for (int k = 0; k < M; ++k) {
        const double dy = grid.dY(k, 0);
        const double m_next = m - a * m * dt + p * (dy - m * dt);
        const double p_next = p + (-2.0 * a * p + sigma * sigma - p * p) * dt;
        m = m_next;
        p = p_next;
        out.mean[k + 1] = m;
        out.variance[k + 1] = p;
    }
    return out;
}

ParticleFilterResult particle_filter(const SdeModel& model, const Vec& x0, const PathGrid& grid,
                                     const std::function<double(const Vec&)>& phi,
                                     int n_particles, int n_replicates, std::uint64_t seed,
                                     std::uint64_t stream_base) {
    check_mc_args(model, x0, grid, 1);
    if (n_particles < 2) throw ValidationError("particle_filter: need at least two particles");
    if (n_replicates < 2)
        throw ValidationError("particle_filter: need at least two replicates for an error bar");

    const int M = grid.M;
    const int d2 = model.d2;
    const double dt = grid.dt();
    const double sdt = std::sqrt(dt);
    const int n = n_particles;

    Eigen::MatrixXd dy(M, d2);
    for (int k = 0; k < M; ++k)
        for (int i = 0; i < d2; ++i) dy(k, i) = grid.dY(k, i);

    const bool fast = model.N == 1 && model.d1 == 1 && model.scalar_loop().valid &&
                      static_cast<int>(model.scalar_loop().sensors.size()) == d2;
    if (!fast && model.N != 1)
        throw ValidationError("particle_filter: only one-dimensional signals are supported");
    const VectorField b_generic = fast ? VectorField() : model.ito_drift();

    ParticleFilterResult out;
    out.replicate_values.reserve(n_replicates);
    std::vector<double> x(n), xr(n), logw(n), w(n);
    Vec xv(1);
    double log_mass_sum = 0.0;

    for (int r = 0; r < n_replicates; ++r) {
        Rng rng(seed, stream_base + static_cast<std::uint64_t>(r));
        std::fill(x.begin(), x.end(), x0[0]);
        double log_mass = 0.0;

        for (int k = 0; k < M; ++k) {
            double max_logw = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < n; ++i) {
                double lw = 0.0;
                if (fast) {
                    const auto& f = model.scalar_loop();
                    for (int c = 0; c < d2; ++c) {
                        const double hi = f.sensors[c](x[i]);
                        lw += hi * dy(k, c) - 0.5 * hi * hi * dt;
                    }
                } else {
                    xv[0] = x[i];
                    for (int c = 0; c < d2; ++c) {
                        const double hi = model.h[c](xv);
                        lw += hi * dy(k, c) - 0.5 * hi * hi * dt;
                    }
                }
                logw[i] = lw;
                max_logw = std::max(max_logw, lw);
            }
            if (!std::isfinite(max_logw))
                throw NumericalGuardError("particle_filter: non-finite weight");
            double sum_w = 0.0, sum_w2 = 0.0;
            for (int i = 0; i < n; ++i) {
                w[i] = std::exp(logw[i] - max_logw);
                sum_w += w[i];
                sum_w2 += w[i] * w[i];
            }
            const double ess = sum_w * sum_w / sum_w2;
            if (ess < 2.0)
                throw NumericalGuardError(
                    "particle_filter: effective sample size collapsed below 2");
            log_mass += std::log(sum_w / n) + max_logw;

            // Systematic resampling: one uniform offset, n equally spaced hits.
            const double u = rng.uniform01();
            const double step = sum_w / n;
            int idx = 0;
            double cum = w[0];
            for (int j = 0; j < n; ++j) {
                const double target = (u + j) * step;
                while (target > cum && idx + 1 < n) cum += w[++idx];
                xr[j] = x[idx];
            }

            // Fresh Euler propagation of the resampled cloud.
            if (fast) {
                const auto& f = model.scalar_loop();
                for (int j = 0; j < n; ++j)
                    x[j] = xr[j] + f.drift(xr[j]) * dt + f.vol(xr[j]) * (sdt * rng.normal());
            } else {
                for (int j = 0; j < n; ++j) {
                    xv[0] = xr[j];
                    double incr = b_generic(xv)[0] * dt;
                    for (int c = 1; c <= model.d1; ++c)
                        incr += model.V[c](xv)[0] * (sdt * rng.normal());
                    x[j] = xr[j] + incr;
                }
            }
        }

        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            xv[0] = x[i];
            acc += phi(xv);
        }
        out.replicate_values.push_back(acc / n);
        log_mass_sum += log_mass;
    }

    double mean = 0.0;
    for (double v : out.replicate_values) mean += v;
    mean /= n_replicates;
    double var = 0.0;
    for (double v : out.replicate_values) var += (v - mean) * (v - mean);
    var /= (n_replicates - 1);
    out.normalised = mean;
    out.stderr_ = std::sqrt(var / n_replicates);
    out.log_mass = log_mass_sum / n_replicates;
    return out;
}

MassBoundReport mass_lower_bound_check(const SdeModel& model, const Vec& x0,
                                       const PathGrid& grid, const SpatialGrid& sgrid,
                                       int n_paths, std::uint64_t seed,
                                       std::uint64_t stream_base) {
    check_mc_args(model, x0, grid, n_paths);
    if (sgrid.N != model.N)
        throw ValidationError("mass_lower_bound_check: spatial grid dimension mismatch");

    const SpMat a = assemble_generator(model.V, sgrid);
    double c_max = 0.0;
    for (int i = 0; i < model.d2; ++i) {
        const Vec hi = sgrid.discretize(model.h[i].value);
        const double h_sup = sup_norm(hi);
        // One cell of margin keeps the reflected boundary rows out of ||A h||.
        const double ah_sup = sup_norm_interior(a * hi, sgrid, 1);
        double grad_sq = 0.0;
        for (int j = 1; j <= model.d1; ++j) {
            const double vh = sup_norm(apply_first_order(model.V[j], model.h[i], sgrid));
            grad_sq += vh * vh;
        }
        const double ci =
            h_sup + grid.T * ah_sup + 0.5 * model.d2 * grid.T * grad_sq;
        c_max = std::max(c_max, ci);
    }

    double y_func = 0.0;
    for (int i = 0; i < model.d2; ++i) {
        double sup_y = 0.0;
        for (int k = 0; k <= grid.M; ++k) sup_y = std::max(sup_y, std::abs(grid.Y(k, i)));
        y_func += sup_y + sup_y * sup_y;
    }

    const RhoResult mass =
        rho_mc(model, x0, grid, [](const Vec&) { return 1.0; }, n_paths, seed, stream_base);

    MassBoundReport rep;
    rep.constant = c_max;
    rep.y_functional = y_func;
    rep.mass = mass.mass;
    rep.mass_stderr = mass.mass_stderr;
    rep.inv_mass = 1.0 / mass.mass;
    rep.bound = std::exp(c_max * y_func);
    rep.pass = rep.inv_mass < rep.bound;
    return rep;
}

} // namespace rholab
