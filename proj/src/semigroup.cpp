#include "rholab/semigroup.hpp"

#include <cmath>

#include "rholab/multi_index.hpp"
#include "rholab/rng.hpp"

namespace rholab {

GridSemigroup::GridSemigroup(const std::vector<VectorField>& fields, SpatialGrid grid,
                             std::function<double(const Vec&)> potential, SemigroupOptions opts)
    : grid_(grid),
      prop_(std::make_unique<Propagator>(assemble_generator(fields, grid, potential),
                                         opts.max_dense_nodes, opts.substep_cap)) {}

GridSemigroup::GridSemigroup(const SdeModel& model, SpatialGrid grid,
                             std::function<double(const Vec&)> potential, SemigroupOptions opts)
    : GridSemigroup(model.V, std::move(grid), std::move(potential), opts) {
    model.validate();
}

AdjointData make_adjoint(const std::vector<VectorField>& fields) {
    if (fields.empty()) throw ValidationError("make_adjoint: need at least the drift field");
    const VectorField v0 = fields[0];
    const std::vector<VectorField> diff(fields.begin() + 1, fields.end());
    const int dim = v0.dim();

    VectorField adj_drift(dim, [v0, diff](const Vec& x) {
        Vec out = -v0(x);
        for (const auto& vi : diff) out += vi.divergence(x) * vi(x);
        return out;
    });

    AdjointData out;
    out.fields.push_back(std::move(adj_drift));
    for (const auto& vi : diff) out.fields.push_back(vi);
    out.potential = [v0, diff](const Vec& x) {
        double c = -v0.divergence(x);
        for (const auto& vi : diff) {
            const double d = vi.divergence(x);
            const Vec v = vi(x);
            const double vn = v.norm();
            double vd = 0.0; // directional derivative of div vi along vi
            if (vn > 0.0) {
                const double delta = 1e-5 * (1.0 + x.norm()) / vn;
                vd = (vi.divergence(x + delta * v) - vi.divergence(x - delta * v)) /
                     (2.0 * delta);
            }
            c += 0.5 * vd + 0.5 * d * d;
        }
        return c;
    };
    return out;
}

GridSemigroup adjoint_semigroup(const SdeModel& model, SpatialGrid grid, SemigroupOptions opts) {
    model.validate();
    AdjointData adj = make_adjoint(model.V);
    return GridSemigroup(adj.fields, std::move(grid), std::move(adj.potential), opts);
}

double h1_norm(const std::vector<VectorField>& fields, int ell, const ScalarField& phi,
               const SpatialGrid& grid, int margin_cells) {
    if (fields.empty()) throw ValidationError("h1_norm: need at least the drift field");
    const int d1 = static_cast<int>(fields.size()) - 1;
    double total = 0.0;
    for (const auto& alpha : enumerate_A0(ell, d1)) {
        const Vec g = alpha.empty() ? grid.discretize(phi.value)
                                    : apply_first_order(bracket_field(fields, alpha), phi, grid);
        total += sup_norm_interior(g, grid, margin_cells);
    }
    return total;
}

double h1_norm(const std::vector<VectorField>& fields, int ell, const Vec& phi,
               const SpatialGrid& grid, int margin_cells) {
    if (fields.empty()) throw ValidationError("h1_norm: need at least the drift field");
    if (phi.size() != grid.size()) throw ValidationError("h1_norm: grid function size mismatch");
    const int d1 = static_cast<int>(fields.size()) - 1;
    double total = 0.0;
    for (const auto& alpha : enumerate_A0(ell, d1)) {
        const Vec g =
            alpha.empty() ? phi : apply_first_order(bracket_field(fields, alpha), phi, grid);
        total += sup_norm_interior(g, grid, margin_cells);
    }
    return total;
}

McValue mc_semigroup_apply(const SdeModel& model, const Vec& x0, double t, int n_steps,
                           const ScalarField& phi, int n_paths, std::uint64_t seed,
                           std::uint64_t stream_base) {
    model.validate();
    if (x0.size() != model.N) throw ValidationError("mc_semigroup_apply: x0 dimension mismatch");
    if (!(t >= 0.0)) throw ValidationError("mc_semigroup_apply: time must be non-negative");
    if (n_steps < 1 || n_paths < 1)
        throw ValidationError("mc_semigroup_apply: need positive step and path counts");

    const double dt = t / n_steps;
    const double sdt = std::sqrt(dt);
    double sum = 0.0, sum_sq = 0.0;

    if (model.N == 1 && model.d1 == 1 && model.scalar_loop().valid) {
        const auto& f = model.scalar_loop();
        const double start = x0[0];
        Vec xv(1);
        for (int p = 0; p < n_paths; ++p) {
            Rng rng(seed, stream_base + static_cast<std::uint64_t>(p));
            double x = start;
            for (int k = 0; k < n_steps; ++k)
                x += f.drift(x) * dt + f.vol(x) * (sdt * rng.normal());
            if (!std::isfinite(x))
                throw NumericalGuardError("mc_semigroup_apply: a path diverged");
            xv[0] = x;
            const double val = phi(xv);
            sum += val;
            sum_sq += val * val;
        }
    } else {
        const VectorField b = model.ito_drift();
        for (int p = 0; p < n_paths; ++p) {
            Rng rng(seed, stream_base + static_cast<std::uint64_t>(p));
            Vec x = x0;
            for (int k = 0; k < n_steps; ++k) {
                Vec incr = b(x) * dt;
                for (int i = 1; i <= model.d1; ++i)
                    incr += model.V[i](x) * (sdt * rng.normal());
                x += incr;
            }
            if (!x.allFinite())
                throw NumericalGuardError("mc_semigroup_apply: a path diverged");
            const double val = phi(x);
            sum += val;
            sum_sq += val * val;
        }
    }

    McValue out;
    out.n_paths = n_paths;
    out.value = sum / n_paths;
    const double var = std::max(0.0, sum_sq / n_paths - out.value * out.value);
    out.stderr_ = std::sqrt(var / n_paths);
    return out;
}

} // namespace rholab
