#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "rholab/grid_operator.hpp"
#include "rholab/sde_model.hpp"

namespace rholab {

struct SemigroupOptions {
    int max_dense_nodes = 500;
    double substep_cap = 1e-3;
};

/// Grid realisation of the (possibly potential-perturbed) semigroup e^{tA}
/// generated by the model's signal fields.
class GridSemigroup {
public:
    GridSemigroup(const std::vector<VectorField>& fields, SpatialGrid grid,
                  std::function<double(const Vec&)> potential = nullptr,
                  SemigroupOptions opts = {});
    GridSemigroup(const SdeModel& model, SpatialGrid grid,
                  std::function<double(const Vec&)> potential = nullptr,
                  SemigroupOptions opts = {});

    const SpatialGrid& grid() const { return grid_; }
    const Propagator& propagator() const { return *prop_; }
    const SpMat& generator() const { return prop_->matrix(); }

    Vec apply(double t, const Vec& phi) const { return prop_->apply(t, phi); }
    Vec apply_transpose(double t, const Vec& phi) const {
        return prop_->apply_transpose(t, phi);
    }
    Mat apply_block(double t, const Mat& u) const { return prop_->apply_block(t, u); }

private:
    SpatialGrid grid_;
    std::unique_ptr<Propagator> prop_;
};

struct AdjointData {
    std::vector<VectorField> fields; // adjoint drift, then the diffusion fields unchanged
    std::function<double(const Vec&)> potential;
};

/// Formal Lebesgue adjoint of A = V0.grad + (1/2) sum_i (Vi.grad)^2:
///   A* = [-V0 + sum_i (div Vi) Vi] . grad + (1/2) sum_i (Vi.grad)^2
///        - div V0 + (1/2) sum_i Vi(div Vi) + (1/2) sum_i (div Vi)^2.
/// The directional derivative Vi(div Vi) is taken by centered differences of
/// the divergence along Vi.
AdjointData make_adjoint(const std::vector<VectorField>& fields);

/// The adjoint semigroup on a grid (duality partner of GridSemigroup(model)).
GridSemigroup adjoint_semigroup(const SdeModel& model, SpatialGrid grid,
                                SemigroupOptions opts = {});

/// Bracket-Sobolev norm: sum over bracket words alpha with degree <= ell
/// (including the empty word) of the interior grid sup of V_[alpha] phi.
double h1_norm(const std::vector<VectorField>& fields, int ell, const ScalarField& phi,
               const SpatialGrid& grid, int margin_cells = 10);

/// Same norm for a grid function (bracket derivatives by grid differences).
double h1_norm(const std::vector<VectorField>& fields, int ell, const Vec& phi,
               const SpatialGrid& grid, int margin_cells = 10);

struct McValue {
    double value = 0.0;
    double stderr_ = 0.0;
    int n_paths = 0;
};

/// Monte Carlo backend for P_t phi(x0): Euler paths of the signal, sample
/// mean of phi at the endpoint.  Independent of the grid discretisation.
McValue mc_semigroup_apply(const SdeModel& model, const Vec& x0, double t, int n_steps,
                           const ScalarField& phi, int n_paths, std::uint64_t seed,
                           std::uint64_t stream_base = 0);

} // namespace rholab
