#include "rholab/path_grid.hpp"

#include <cmath>
#include <string>

#include "rholab/errors.hpp"
#include "rholab/rng.hpp"

namespace rholab {

void PathGrid::validate() const {
    if (M < 1) throw ValidationError("path grid: need at least one step");
    if (!(T > 0.0)) throw ValidationError("path grid: horizon must be positive");
    if (Y.rows() != M + 1) throw ValidationError("path grid: Y must have M+1 rows");
    if (Y.row(0).cwiseAbs().maxCoeff() != 0.0)
        throw ValidationError("path grid: Y must start at zero");
    if (dB.size() > 0 && dB.rows() != M)
        throw ValidationError("path grid: dB must have M rows");
}

PathGrid make_grid(double T, int M, int d1, int d2) {
    PathGrid g;
    g.T = T;
    g.M = M;
    g.dB = Eigen::MatrixXd::Zero(M, d1);
    g.Y = Eigen::MatrixXd::Zero(M + 1, d2);
    g.validate();
    return g;
}

Eigen::MatrixXd brownian_increments(std::uint64_t seed, std::uint64_t stream, int M, int d,
                                    double dt) {
    Rng rng(seed, stream);
    const double scale = std::sqrt(dt);
    Eigen::MatrixXd out(M, d);
    for (int k = 0; k < M; ++k)
        for (int j = 0; j < d; ++j) out(k, j) = scale * rng.normal();
    return out;
}

void fill_brownian_observation(PathGrid& grid, std::uint64_t seed, std::uint64_t stream) {
    const int d2 = static_cast<int>(grid.Y.cols());
    const Eigen::MatrixXd dW = brownian_increments(seed, stream, grid.M, d2, grid.dt());
    grid.Y.row(0).setZero();
    for (int k = 0; k < grid.M; ++k) grid.Y.row(k + 1) = grid.Y.row(k) + dW.row(k);
    grid.seed = seed;
}

Eigen::MatrixXd simulate_signal(const SdeModel& model, const Vec& x0, const PathGrid& grid) {
    model.validate();
    if (x0.size() != model.N) throw ValidationError("simulate_signal: x0 dimension mismatch");
    if (grid.dB.cols() != model.d1)
        throw ValidationError("simulate_signal: grid carries wrong number of noise columns");
    const double dt = grid.dt();
    Eigen::MatrixXd x_path(grid.M + 1, model.N);
    if (model.N == 1 && model.d1 == 1) {
        const FastScalar& f = model.scalar_loop();
        double x = x0[0];
        x_path(0, 0) = x;
        for (int k = 0; k < grid.M; ++k) {
            x += f.drift(x) * dt + f.vol(x) * grid.dB(k, 0);
            if (!std::isfinite(x))
                throw NumericalGuardError("simulate_signal: state diverged at step " +
                                          std::to_string(k + 1));
            x_path(k + 1, 0) = x;
        }
        return x_path;
    }
    const VectorField b = model.ito_drift();
    Vec x = x0;
    x_path.row(0) = x;
    for (int k = 0; k < grid.M; ++k) {
        Vec next = x + b(x) * dt;
        for (int i = 1; i <= model.d1; ++i) next += model.V[i](x) * grid.dB(k, i - 1);
        if (!next.allFinite())
            throw NumericalGuardError("simulate_signal: state diverged at step " +
                                      std::to_string(k + 1));
        x = next;
        x_path.row(k + 1) = x;
    }
    return x_path;
}

Eigen::MatrixXd simulate_observation(const SdeModel& model, const Eigen::MatrixXd& x_path,
                                     const PathGrid& grid, const Eigen::MatrixXd& dW) {
    if (x_path.rows() != grid.M + 1 || x_path.cols() != model.N)
        throw ValidationError("simulate_observation: signal path has wrong shape");
    if (dW.rows() != grid.M || dW.cols() != model.d2)
        throw ValidationError("simulate_observation: dW has wrong shape");
    const double dt = grid.dt();
    Eigen::MatrixXd y(grid.M + 1, model.d2);
    y.row(0).setZero();
    for (int k = 0; k < grid.M; ++k) {
        const Vec x = x_path.row(k);
        for (int i = 0; i < model.d2; ++i)
            y(k + 1, i) = y(k, i) + model.h[i](x) * dt + dW(k, i);
    }
    return y;
}

std::vector<Mat> jacobian_flow(const SdeModel& model, const Vec& x0, const PathGrid& grid) {
    model.validate();
    const double dt = grid.dt();
    const VectorField b = model.ito_drift();
    std::vector<Mat> flow;
    flow.reserve(grid.M + 1);
    Vec x = x0;
    Mat J = Mat::Identity(model.N, model.N);
    flow.push_back(J);
    for (int k = 0; k < grid.M; ++k) {
        Mat next = J + b.jacobian(x) * J * dt;
        for (int i = 1; i <= model.d1; ++i)
            next += model.V[i].jacobian(x) * J * grid.dB(k, i - 1);
        Vec x_next = x + b(x) * dt;
        for (int i = 1; i <= model.d1; ++i) x_next += model.V[i](x) * grid.dB(k, i - 1);
        if (!next.allFinite() || !x_next.allFinite())
            throw NumericalGuardError("jacobian_flow: state diverged at step " +
                                      std::to_string(k + 1));
        J = next;
        x = x_next;
        flow.push_back(J);
    }
    return flow;
}

PathGrid sample_observation_path(const SdeModel& model, const Vec& x0, double T, int M,
                                 std::uint64_t seed, std::uint64_t scenario) {
    PathGrid grid = make_grid(T, M, model.d1, model.d2);
    grid.dB = brownian_increments(seed, 2 * scenario, M, model.d1, grid.dt());
    const Eigen::MatrixXd x_path = simulate_signal(model, x0, grid);
    const Eigen::MatrixXd dW =
        brownian_increments(seed, 2 * scenario + 1, M, model.d2, grid.dt());
    grid.Y = simulate_observation(model, x_path, grid, dW);
    grid.seed = seed;
    return grid;
}

PathGrid coarsen(const PathGrid& grid, int factor) {
    if (factor < 1 || grid.M % factor != 0)
        throw ValidationError("coarsen: factor must divide the step count");
    PathGrid out;
    out.T = grid.T;
    out.M = grid.M / factor;
    out.seed = grid.seed;
    out.Y.resize(out.M + 1, grid.Y.cols());
    for (int k = 0; k <= out.M; ++k) out.Y.row(k) = grid.Y.row(k * factor);
    if (grid.dB.size() > 0) {
        out.dB = Eigen::MatrixXd::Zero(out.M, grid.dB.cols());
        for (int k = 0; k < out.M; ++k)
            for (int j = 0; j < factor; ++j) out.dB.row(k) += grid.dB.row(k * factor + j);
    }
    return out;
}

PathGrid restrict_steps(const PathGrid& grid, int K) {
    if (K < 1 || K > grid.M) throw ValidationError("restrict_steps: K out of range");
    PathGrid out;
    out.T = grid.dt() * K;
    out.M = K;
    out.seed = grid.seed;
    out.Y = grid.Y.topRows(K + 1);
    if (grid.dB.size() > 0) out.dB = grid.dB.topRows(K);
    return out;
}

} // namespace rholab
