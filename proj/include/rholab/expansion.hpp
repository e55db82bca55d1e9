#pragma once

#include <vector>

#include "rholab/multi_index.hpp"
#include "rholab/path_grid.hpp"
#include "rholab/semigroup.hpp"

namespace rholab {

/// Sensor grid functions, one per observation channel.
std::vector<Vec> discretize_sensors(const SdeModel& model, const SpatialGrid& grid);

/// Level operators of the observation expansion, summed over words, evaluated
/// as grid functions at the window start s:
///   level m = sum over |w| = m of the left-point iterated operator sum
///     sum_{s <= u_1 < ... < u_m < t} P H P H ... H P phi dY...dY.
/// Computed by one backward sweep with levels+1 propagator applications per
/// grid step; returns levels 0..levels.
std::vector<Vec> level_sums(const GridSemigroup& sg, const std::vector<Vec>& sensors,
                            const PathGrid& grid, const Vec& phi, int levels, int s_idx,
                            int t_idx);

/// Single-word operator value R^{|w|, w} phi at s for a nonempty observation
/// word w (letters 1..d2); same recursion restricted to one word.
Vec word_operator_value(const GridSemigroup& sg, const std::vector<Vec>& sensors,
                        const PathGrid& grid, const Vec& phi, const MultiIndex& word,
                        int s_idx, int t_idx);

struct ExpansionResult {
    std::vector<Vec> levels;       // level contribution m = 0..M as grid functions
    std::vector<Vec> partial_sums; // partial_sums[m] = sum of levels 0..m
    std::vector<double> level_sup; // sup norm of each level (decay diagnostic)

    const Vec& truncation() const { return partial_sums.back(); }
};

/// Truncation of the observation expansion after the given level.
ExpansionResult truncated_expansion(const GridSemigroup& sg, const std::vector<Vec>& sensors,
                                    const PathGrid& grid, const Vec& phi, int truncation_level,
                                    int s_idx, int t_idx);

/// Transpose-side recursion: Z_j at the window end for a terminal functional
/// psi, with <Z_j, phi> = <psi, R^j phi> for every grid observable phi.  The
/// composition order of the one-step factors is reversed relative to the
/// forward recursion, matching the transpose of a product.
std::vector<Vec> adjoint_level_sums(const GridSemigroup& sg, const std::vector<Vec>& sensors,
                                    const PathGrid& grid, const Vec& psi, int levels,
                                    int s_idx, int t_idx);

/// The adjoint expansion packaged like the forward one.
ExpansionResult adjoint_truncated_expansion(const GridSemigroup& sg,
                                            const std::vector<Vec>& sensors,
                                            const PathGrid& grid, const Vec& psi,
                                            int truncation_level, int s_idx, int t_idx);

struct DualityReport {
    std::vector<double> per_level; // relative pairing residual per level
    double summed = 0.0;           // residual of the truncation pairing
    double max_residual = 0.0;
};

/// Pairs the forward levels against the transpose recursion.
DualityReport duality_check(const GridSemigroup& sg, const std::vector<Vec>& sensors,
                            const PathGrid& grid, const Vec& phi, const Vec& psi, int levels,
                            int s_idx, int t_idx);

struct NormDecayReport {
    std::vector<double> lengths; // window lengths in time units, one per scale
    std::vector<double> ratios;  // scale response: window mean of the dictionary
                                 // sup of |R phi|_H1 / |phi|_H1
    double slope = 0.0;          // least-squares slope of log ratio vs log length
    double target = 0.0;         // level * gamma - 0.1
    bool pass = false;
    bool trivial = false;        // every dictionary response vanished (e.g. Y = 0)
};

/// Short-time decay of the level-operator norm surrogate
///   sup_phi |R^m phi|_H1 / |phi|_H1
/// over a fixed 32-function dictionary of bumps and plane waves.  Scale r
/// (r = 1..n_scales) uses up to max_windows disjoint windows of
/// base_steps/2^{r-1} grid steps tiled from s_idx, and averages the
/// dictionary sup over them; the slope of log response against log window
/// length is fitted by least squares and passes when >= level*gamma - 0.1.
/// The path should be much longer than base_steps so every scale sees
/// several independent windows.  Fewer than four scales make the fit
/// degenerate (ValidationError).
NormDecayReport operator_norm_decay(const SdeModel& model, const GridSemigroup& sg,
                                    const PathGrid& grid, int level, double gamma,
                                    int base_steps, int n_scales, int s_idx = 0,
                                    int max_windows = 12, int margin_cells = 10);

} // namespace rholab
