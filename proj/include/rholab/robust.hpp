#pragma once

#include <string>
#include <vector>

#include "rholab/grid_operator.hpp"
#include "rholab/multi_index.hpp"
#include "rholab/path_grid.hpp"
#include "rholab/sde_model.hpp"
#include "rholab/semigroup.hpp"

namespace rholab {

/// Sensor commutator operator Psi_k = [A, h^k .] realised exactly on the
/// grid as the matrix commutator  A diag(h^k) - diag(h^k) A.  This is the
/// realisation the pathwise evaluators use: it satisfies the defining
/// commutator identity to machine precision, so the only error left in the
/// representation is the time discretisation.
SpMat psi_commutator(const SpMat& generator, const Vec& h_grid, int k);

/// Product-rule realisation of the same operator for a sensor word,
///   Psi_w phi = (A h_w) phi + sum_i (V_i h_w) (V_i phi),  h_w = prod_j h_{i_j},
/// with grid differences for the directional derivatives.  Agrees with the
/// commutator realisation to O(cell^2) at interior points.
Vec psi_operator(const SdeModel& model, const GridSemigroup& sg, const MultiIndex& word,
                 const Vec& phi);

/// One nested time integral of the pathwise representation.  Inside the dr
/// integral the running scalar coefficient is prod_w q^w_{s,r}; the operator
/// applied is Psi_{psi_k} after multiplication by the sensor power h^{h_inside}.
struct IbpStage {
    std::vector<int> q_weights;
    int psi_k = 1;
    int h_inside = 0;
};

/// One term of the pathwise representation: an overall sign, iterated-integral
/// factors q^w_{s,t} outside all time integrals, a chain of nested integral
/// stages (outermost first), and the sensor power multiplying phi inside the
/// terminal semigroup flow.
struct IbpTerm {
    int level = 1;
    double sign = 1.0;
    std::vector<int> outer_q;
    std::vector<IbpStage> stages;
    int terminal_h = 0;
    std::string id;
};

/// Frozen term lists of the pathwise representation, levels 1..3, for a
/// single observation channel.  Level 1 has 2 terms, level 2 has 5, level 3
/// has 14.  The level-3 list is completed from the level-2 one by a further
/// integration by parts; it is pinned by the degree audit and by step-halving
/// agreement with the direct expansion operators (see tests).
const std::vector<IbpTerm>& ibp_terms(int level);

/// Checks that every term's total iterated-integral degree (the sum of all
/// its q weights, outer and per-stage) equals its level.  Empty lists pass.
bool degree_audit(const std::vector<IbpTerm>& terms);

/// Human-readable operator-chain label for one term, for report output.
std::string ibp_term_label(const IbpTerm& term);

/// Pathwise value of one representation term over [t_s, t_t]: nested backward
/// trapezoid sweeps against the semigroup, with q read from the observation
/// path.  Requires a single observation channel.
Vec ibp_term_value(const IbpTerm& term, const GridSemigroup& sg, const Vec& h_grid,
                   const PathGrid& grid, const Vec& phi, int s_idx, int t_idx);

/// All term values at one level, in the order of ibp_terms(level).
std::vector<Vec> ibp_term_values(const GridSemigroup& sg, const Vec& h_grid,
                                 const PathGrid& grid, const Vec& phi, int level,
                                 int s_idx, int t_idx);

/// Sum of the term values: the pathwise (integration-by-parts) evaluation of
/// the level-m observation-expansion operator.  Converges to the direct
/// left-point evaluation at first order in the step size.
Vec ibp_level_value(const GridSemigroup& sg, const Vec& h_grid, const PathGrid& grid,
                    const Vec& phi, int level, int s_idx, int t_idx);

Vec ibp_level1(const GridSemigroup& sg, const Vec& h_grid, const PathGrid& grid,
               const Vec& phi, int s_idx, int t_idx);
Vec ibp_level2(const GridSemigroup& sg, const Vec& h_grid, const PathGrid& grid,
               const Vec& phi, int s_idx, int t_idx);
Vec ibp_level3(const GridSemigroup& sg, const Vec& h_grid, const PathGrid& grid,
               const Vec& phi, int s_idx, int t_idx);

} // namespace rholab
