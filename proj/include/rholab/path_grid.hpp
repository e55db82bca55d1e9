#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "rholab/sde_model.hpp"

namespace rholab {

/// A uniform time grid 0 = t_0 < ... < t_M = T carrying one realization of
/// the driving Brownian increments dB (M x d1) and the observation path Y
/// ((M+1) x d2, Y_0 = 0).  All stochastic integrals in the repo are
/// left-point sums on one such shared grid.
struct PathGrid {
    double T = 1.0;
    int M = 1;
    Eigen::MatrixXd dB; // M x d1
    Eigen::MatrixXd Y;  // (M+1) x d2
    std::uint64_t seed = 0;

    double dt() const { return T / M; }
    double time(int k) const { return T * static_cast<double>(k) / M; }
    int d1() const { return static_cast<int>(dB.cols()); }
    int d2() const { return static_cast<int>(Y.cols()); }
    /// Increment of channel i over [t_k, t_{k+1}].
    double dY(int k, int i) const { return Y(k + 1, i) - Y(k, i); }
    void validate() const;
};

/// Zero-initialized grid of the given shape.
PathGrid make_grid(double T, int M, int d1, int d2);

/// M x d columns of N(0, dt) increments drawn from the given stream.
Eigen::MatrixXd brownian_increments(std::uint64_t seed, std::uint64_t stream, int M, int d,
                                    double dt);

/// Fills grid.Y with a pure Brownian path (reference-measure observation).
void fill_brownian_observation(PathGrid& grid, std::uint64_t seed, std::uint64_t stream);

/// Euler-Maruyama on the Ito form with corrected drift
/// b = V0 + (1/2) sum (DV_i) V_i.  Returns X at all grid times, (M+1) x N.
/// Throws NumericalGuardError (with the step index) if the state leaves the
/// finite range.
Eigen::MatrixXd simulate_signal(const SdeModel& model, const Vec& x0, const PathGrid& grid);

/// Y_{k+1} = Y_k + h(X_k) dt + dW_k per channel; dW is M x d2.
Eigen::MatrixXd simulate_observation(const SdeModel& model, const Eigen::MatrixXd& x_path,
                                     const PathGrid& grid, const Eigen::MatrixXd& dW);

/// Variational Euler scheme for the Jacobian flow J_t = dX_t^x/dx alongside
/// the state path; J_0 = identity.  Returns M+1 matrices of size N x N.
std::vector<Mat> jacobian_flow(const SdeModel& model, const Vec& x0, const PathGrid& grid);

/// Simulates a full observation scenario: a hidden signal from x0 (stream
/// `2*scenario`), observation noise W (stream `2*scenario+1`), and the
/// resulting Y path.  This is the "random Y path" generator used by tests.
PathGrid sample_observation_path(const SdeModel& model, const Vec& x0, double T, int M,
                                 std::uint64_t seed, std::uint64_t scenario);

/// Keeps every `factor`-th grid point (M must be divisible by factor);
/// Y restricts, dB increments add up.  Used by step-halving studies so that
/// every resolution sees the same underlying path.
PathGrid coarsen(const PathGrid& grid, int factor);

/// The first K steps of the grid (horizon K * dt).
PathGrid restrict_steps(const PathGrid& grid, int K);

} // namespace rholab
