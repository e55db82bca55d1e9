#pragma once

#include <Eigen/Sparse>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "rholab/errors.hpp"
#include "rholab/sde_model.hpp"
#include "rholab/vector_field.hpp"

namespace rholab {

using SpMat = Eigen::SparseMatrix<double>;

/// Uniform tensor grid on [-L, L]^N with n nodes per axis, x_j = -L + j h,
/// h = 2L/(n-1).  Functions live as flat vectors with axis 0 fastest.
/// Boundary stencils use reflected neighbours (f_{-1} := f_1), the discrete
/// zero-flux condition, so that every derivative stencil annihilates
/// constants exactly.
struct SpatialGrid {
    int N = 1;
    int n = 2;
    double L = 1.0;

    SpatialGrid(int n_dims, int n_per_axis, double half_width);

    double h() const { return 2.0 * L / (n - 1); }
    long size() const { return size_; }
    double coord(int j) const { return -L + j * h(); }
    int reflect(int j) const { return j < 0 ? -j : (j >= n ? 2 * n - 2 - j : j); }

    long flat(const std::vector<int>& mj) const;
    std::vector<int> multi(long idx) const;
    Vec node(long idx) const;

    Vec discretize(const std::function<double(const Vec&)>& f) const;

private:
    long size_ = 0;
};

/// Second-order upwind-free discretisation of the generator
///   A = V_0 . grad + (1/2) sum_i (V_i . grad)^2  [+ potential]
/// expanded by the product rule into a drift b = V_0 + (1/2) sum_i (DV_i)V_i
/// and a diffusion tensor sum_i V_i V_i^T.  Mixed second derivatives use the
/// four-corner cross stencil and are only assembled where their coefficient
/// is nonzero.  After assembly the diagonal absorbs each row's floating-point
/// residual so that A 1 = 0 holds to roundoff (mass conservation); the
/// potential is added afterwards.
SpMat assemble_generator(const std::vector<VectorField>& fields, const SpatialGrid& grid,
                         const std::function<double(const Vec&)>& potential = nullptr);

/// Matrix commutator X Y - Y X.
SpMat commutator(const SpMat& x, const SpMat& y);

/// e^{tA} applied through one of two backends:
///  - dense scaling-and-squaring matrix exponential when the node count is
///    at most `max_dense_nodes` (exact up to roundoff, cached per t);
///  - Crank-Nicolson otherwise, with substeps capped at `substep_cap`; runs
///    needing more than one substep start with two implicit-Euler half-steps
///    to damp unresolved modes.  One LU factorisation per distinct substep
///    size is cached and shared by the solve and its transpose.
/// apply_transpose composes the exact linear transposes of the forward
/// substeps in reverse order, so duality pairings close at solver precision.
class Propagator {
public:
    explicit Propagator(SpMat a, int max_dense_nodes = 500, double substep_cap = 1e-3);

    long size() const { return a_.rows(); }
    bool dense_mode() const { return dense_; }
    const SpMat& matrix() const { return a_; }

    Vec apply(double t, const Vec& v) const;
    Vec apply_transpose(double t, const Vec& v) const;
    Vec apply_generator(const Vec& v) const { return a_ * v; }

    /// apply on a block of column vectors at once (batched probe functions).
    Mat apply_block(double t, const Mat& u) const;

    /// The cached dense exponential e^{tA}; only in dense mode.
    const Mat& dense_exponential(double t) const;

private:
    struct SparseStep {
        double half = 0.0; // dt'/2
        Eigen::SparseLU<SpMat> lu;   // I - (dt'/2) A
        Eigen::SparseLU<SpMat> lu_t; // its transpose
    };

    const SparseStep& step_for(double dt_sub) const;
    int substeps(double t) const;

    SpMat a_;
    SpMat at_;
    bool dense_ = false;
    Mat a_dense_;
    double substep_cap_ = 1e-3;
    mutable std::map<double, Mat> expm_cache_;
    mutable std::map<double, std::unique_ptr<SparseStep>> step_cache_;
};

/// (V phi)(x) = V(x) . grad phi(x) for an analytic observable (uses the
/// ScalarField gradient, analytic when present).
Vec apply_first_order(const VectorField& field, const ScalarField& phi, const SpatialGrid& grid);

/// Grid-function version: centered differences inside, second-order one-sided
/// differences on the boundary faces.
Vec apply_first_order(const VectorField& field, const Vec& phi, const SpatialGrid& grid);

/// Plain sup norm, sup norm over nodes at least `margin_cells` from every
/// face, and sup norm over the centered window |x_a| <= halfwidth.
double sup_norm(const Vec& f);
double sup_norm_interior(const Vec& f, const SpatialGrid& grid, int margin_cells = 10);
double sup_norm_window(const Vec& f, const SpatialGrid& grid, double halfwidth);

/// Uniform-weight quadrature pairing h^N sum_j a_j b_j (discrete L^2(dx)).
double grid_inner(const Vec& a, const Vec& b, const SpatialGrid& grid);

} // namespace rholab
