#pragma once

#include <vector>

#include "rholab/expansion.hpp"
#include "rholab/multi_index.hpp"
#include "rholab/path_grid.hpp"
#include "rholab/sde_model.hpp"
#include "rholab/semigroup.hpp"

namespace rholab {

/// Which operator family the small-time gradient fit probes: the plain
/// semigroup, the unnormalised filter, or the normalised filter.
enum class GradientTarget { heat, rho, pi };

/// Small-time decay fit of ||D_alpha T_t (D_beta phi)||_inf against t, where
/// D_gamma composes first-order grid derivatives along the model fields named
/// by the letters of gamma (0 = drift field).  The expected decay exponent is
/// -(deg alpha + deg beta)/2 with zeros weighted double (time-like letters).
struct ExponentReport {
    GradientTarget target = GradientTarget::heat;
    MultiIndex alpha;
    MultiIndex beta;
    std::vector<double> times;     // strictly decreasing toward zero
    std::vector<double> sup_norms; // one per time
    double slope = 0.0;            // least-squares slope of log norm vs log t
    double theoretical = 0.0;      // -(deg alpha + deg beta)/2
    double margin = 0.0;           // slope - (theoretical - 0.1)
    bool pass = false;             // slope >= theoretical - 0.1
};

/// Samples ||D_alpha T_t (D_beta phi)||_inf at the given times (at least five,
/// strictly decreasing, positive) and fits the log-log slope.
///
/// For the rho/pi targets a path must be supplied and every time must lie on
/// its grid; the filter value is the truncated observation expansion with
/// `levels` correction levels, which is accurate for the small times the fit
/// uses.  The pi target divides by the filter mass and raises
/// NumericalGuardError if that mass falls below 1e-12 anywhere.
///
/// Norms are taken over the 10-cell-margin interior when alpha or beta is
/// nonempty; a strictly larger sup on the full grid means the derivative
/// stencils are feeding off the reflecting boundary and raises
/// NumericalGuardError (boundary-layer contamination), as do norms below
/// 1e-12 (vacuous fit).
ExponentReport gradient_exponent_fit(const SdeModel& model, const GridSemigroup& sg,
                                     GradientTarget target, const MultiIndex& alpha,
                                     const MultiIndex& beta, const Vec& phi,
                                     const std::vector<double>& times,
                                     const PathGrid* path = nullptr, int levels = 3);

/// Grid residual of the quotient rule for the normalised filter,
///   D_alpha pi(psi) = [D_alpha rho(psi) rho(1) - rho(psi) D_alpha rho(1)] / rho(1)^2
/// with psi = D_beta phi.  alpha must be a single letter (the identity is
/// first order); the residual is the interior sup of LHS - RHS and decays at
/// second order in the cell size.  Raises NumericalGuardError if rho(1)
/// drops below 1e-12 on the grid.
double normalised_quotient_check(const SdeModel& model, const GridSemigroup& sg,
                                 const MultiIndex& alpha, const MultiIndex& beta,
                                 const Vec& phi, const PathGrid& path, int t_idx,
                                 int levels = 3);

} // namespace rholab
