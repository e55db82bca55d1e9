#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rholab/grid_operator.hpp"
#include "rholab/path_grid.hpp"
#include "rholab/sde_model.hpp"

namespace rholab {

struct RhoResult {
    double value = 0.0;      // unnormalised functional estimate
    double stderr_ = 0.0;
    double mass = 0.0;       // estimate of the total mass (observable = 1)
    double mass_stderr = 0.0;
    double normalised = 0.0; // value / mass
    double normalised_stderr = 0.0; // delta-method error of the quotient
    int n_paths = 0;
};

/// Weighted Monte Carlo estimate of the unnormalised filtering functional
///   rho_t(phi) = E[ phi(X_t) Z_t | Y ],
/// with signal paths simulated independently of the fixed observation path
/// and the change-of-measure weight accumulated by the left-point sum
///   log Z = sum_k sum_i [ h_i(X_k) dY^i_k - (1/2) h_i(X_k)^2 dt ].
/// A path whose |log Z| exceeds 700 (exp overflow range) raises
/// NumericalGuardError.  All observables share the same paths, so linear
/// identities hold to roundoff across one call.
std::vector<RhoResult> rho_mc_multi(const SdeModel& model, const Vec& x0, const PathGrid& grid,
                                    const std::vector<std::function<double(const Vec&)>>& phis,
                                    int n_paths, std::uint64_t seed,
                                    std::uint64_t stream_base = 0);

RhoResult rho_mc(const SdeModel& model, const Vec& x0, const PathGrid& grid,
                 const std::function<double(const Vec&)>& phi, int n_paths, std::uint64_t seed,
                 std::uint64_t stream_base = 0);

struct KalmanBucyResult {
    Vec mean;     // conditional mean at every grid time
    Vec variance; // Riccati variance at every grid time
};

/// Euler scheme for the linear-Gaussian filter with identity sensor:
///   dm = -a m dt + P (dY - m dt),   dP/dt = -2 a P + sigma^2 - P^2,
/// driven by channel 0 of the supplied observation grid.
KalmanBucyResult kalman_bucy_oracle(double a, double sigma, const PathGrid& grid, double m0,
                                    double p0);

struct ParticleFilterResult {
    double normalised = 0.0; // mean over replicates of the particle estimate
    double stderr_ = 0.0;    // spread across replicates
    double log_mass = 0.0;   // mean replicate estimate of log rho_t(1)
    std::vector<double> replicate_values;
};

/// Bootstrap particle filter: left-point exponential weights, systematic
/// resampling at every step, fresh Euler propagation afterwards.  An
/// effective sample size below 2 at any step raises NumericalGuardError.
/// The returned error bar is the standard error across independent
/// replicates (default caller choice ~5).
ParticleFilterResult particle_filter(const SdeModel& model, const Vec& x0, const PathGrid& grid,
                                     const std::function<double(const Vec&)>& phi,
                                     int n_particles, int n_replicates, std::uint64_t seed,
                                     std::uint64_t stream_base = 0);

struct MassBoundReport {
    double inv_mass = 0.0;    // 1 / rho_hat(1)
    double bound = 0.0;       // exp(C * sum_i (sup|Y^i| + sup|Y^i|^2))
    double constant = 0.0;    // C
    double y_functional = 0.0; // sum_i (sup|Y^i| + sup|Y^i|^2)
    double mass = 0.0;
    double mass_stderr = 0.0;
    bool pass = false;
};

/// Verifies the pathwise lower bound on the total mass:
///   1 / rho_t(1) < exp( C sum_i (sup_s |Y^i_s| + sup_s |Y^i_s|^2) ),
/// with C = max_i ( ||h^i|| + t ||A h^i|| + (d2 t / 2) sum_j ||V_j h^i||^2 ),
/// all norms taken as grid maxima on the supplied spatial grid.
MassBoundReport mass_lower_bound_check(const SdeModel& model, const Vec& x0,
                                       const PathGrid& grid, const SpatialGrid& sgrid,
                                       int n_paths, std::uint64_t seed,
                                       std::uint64_t stream_base = 0);

} // namespace rholab
