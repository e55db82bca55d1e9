#include "rholab/grid_operator.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <string>

namespace rholab {

SpatialGrid::SpatialGrid(int n_dims, int n_per_axis, double half_width)
    : N(n_dims), n(n_per_axis), L(half_width) {
    if (N < 1 || N > 4) throw ValidationError("SpatialGrid: dimension must be 1..4");
    if (n < 2) throw ValidationError("SpatialGrid: need at least two nodes per axis");
    if (!(L > 0.0)) throw ValidationError("SpatialGrid: half-width must be positive");
    size_ = 1;
    for (int a = 0; a < N; ++a) {
        size_ *= n;
        if (size_ > 4'000'000) throw ValidationError("SpatialGrid: node count too large");
    }
}

long SpatialGrid::flat(const std::vector<int>& mj) const {
    long idx = 0;
    long stride = 1;
    for (int a = 0; a < N; ++a) {
        idx += mj[a] * stride;
        stride *= n;
    }
    return idx;
}

std::vector<int> SpatialGrid::multi(long idx) const {
    std::vector<int> mj(N);
    for (int a = 0; a < N; ++a) {
        mj[a] = static_cast<int>(idx % n);
        idx /= n;
    }
    return mj;
}

Vec SpatialGrid::node(long idx) const {
    Vec x(N);
    for (int a = 0; a < N; ++a) {
        x[a] = coord(static_cast<int>(idx % n));
        idx /= n;
    }
    return x;
}

Vec SpatialGrid::discretize(const std::function<double(const Vec&)>& f) const {
    Vec out(size_);
    for (long idx = 0; idx < size_; ++idx) out[idx] = f(node(idx));
    return out;
}

SpMat assemble_generator(const std::vector<VectorField>& fields, const SpatialGrid& grid,
                         const std::function<double(const Vec&)>& potential) {
    if (fields.empty()) throw ValidationError("assemble_generator: need at least the drift field");
    for (const auto& f : fields)
        if (f.dim() != grid.N)
            throw ValidationError("assemble_generator: field dimension does not match the grid");

    const int N = grid.N;
    const double h = grid.h();
    const double inv2h = 1.0 / (2.0 * h);
    const double invh2 = 1.0 / (h * h);
    const long size = grid.size();
    const int n_diff = static_cast<int>(fields.size()) - 1;

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(size) * (1 + 4 * N + 2 * N * (N - 1)));

    std::vector<int> mj(N), mk(N);
    std::vector<long> stride(N);
    stride[0] = 1;
    for (int a = 1; a < N; ++a) stride[a] = stride[a - 1] * grid.n;

    const auto neighbor = [&](long base, const std::vector<int>& j, int axis, int off) {
        const int r = grid.reflect(j[axis] + off);
        return base + (r - j[axis]) * stride[axis];
    };

    for (long idx = 0; idx < size; ++idx) {
        mj = grid.multi(idx);
        const Vec x = grid.node(idx);

        // Ito-corrected drift and diffusion tensor at this node.
        Vec b = fields[0](x);
        Mat c = Mat::Zero(N, N);
        for (int i = 1; i <= n_diff; ++i) {
            const Vec vi = fields[i](x);
            b += 0.5 * (fields[i].jacobian(x) * vi);
            c += vi * vi.transpose();
        }

        for (int a = 0; a < N; ++a) {
            const long jp = neighbor(idx, mj, a, +1);
            const long jm = neighbor(idx, mj, a, -1);
            if (b[a] != 0.0) {
                trips.emplace_back(idx, jp, b[a] * inv2h);
                trips.emplace_back(idx, jm, -b[a] * inv2h);
            }
            const double caa = 0.5 * c(a, a);
            if (caa != 0.0) {
                trips.emplace_back(idx, jp, caa * invh2);
                trips.emplace_back(idx, jm, caa * invh2);
                trips.emplace_back(idx, idx, -2.0 * caa * invh2);
            }
            for (int bx = a + 1; bx < N; ++bx) {
                const double cab = c(a, bx); // both symmetric halves
                if (cab == 0.0) continue;
                const double w = cab * invh2 * 0.25;
                for (int sa : {-1, +1})
                    for (int sb : {-1, +1}) {
                        mk = mj;
                        mk[a] = grid.reflect(mk[a] + sa);
                        mk[bx] = grid.reflect(mk[bx] + sb);
                        trips.emplace_back(idx, grid.flat(mk), (sa == sb ? w : -w));
                    }
            }
        }
    }

    SpMat a(size, size);
    a.setFromTriplets(trips.begin(), trips.end());

    // Fold each row's floating-point residual into the diagonal: constants
    // are then exact fixed points of the semigroup.
    const Vec row_sums = a * Vec::Ones(size);
    for (long i = 0; i < size; ++i) a.coeffRef(i, i) -= row_sums[i];

    if (potential) {
        for (long i = 0; i < size; ++i) a.coeffRef(i, i) += potential(grid.node(i));
    }
    a.makeCompressed();
    return a;
}

SpMat commutator(const SpMat& x, const SpMat& y) {
    SpMat out = (x * y - y * x).pruned();
    out.makeCompressed();
    return out;
}

Propagator::Propagator(SpMat a, int max_dense_nodes, double substep_cap)
    : a_(std::move(a)), substep_cap_(substep_cap) {
    if (a_.rows() != a_.cols()) throw ValidationError("Propagator: matrix must be square");
    if (!(substep_cap_ > 0.0)) throw ValidationError("Propagator: substep cap must be positive");
    dense_ = a_.rows() <= max_dense_nodes;
    if (dense_)
        a_dense_ = Mat(a_);
    else
        at_ = a_.transpose();
}

int Propagator::substeps(double t) const {
    return std::max(1, static_cast<int>(std::ceil(t / substep_cap_ - 1e-12)));
}

const Propagator::SparseStep& Propagator::step_for(double dt_sub) const {
    auto it = step_cache_.find(dt_sub);
    if (it != step_cache_.end()) return *it->second;

    auto step = std::make_unique<SparseStep>();
    step->half = 0.5 * dt_sub;
    SpMat id(a_.rows(), a_.cols());
    id.setIdentity();
    SpMat s = id - step->half * a_;
    s.makeCompressed();
    step->lu.compute(s);
    if (step->lu.info() != Eigen::Success)
        throw NumericalGuardError("Propagator: LU factorisation of the implicit step failed");
    SpMat st = s.transpose();
    st.makeCompressed();
    step->lu_t.compute(st);
    if (step->lu_t.info() != Eigen::Success)
        throw NumericalGuardError("Propagator: LU factorisation of the transposed step failed");
    return *step_cache_.emplace(dt_sub, std::move(step)).first->second;
}

Vec Propagator::apply(double t, const Vec& v) const {
    if (!(t >= 0.0)) throw ValidationError("Propagator: time must be non-negative");
    if (v.size() != a_.rows()) throw ValidationError("Propagator: vector size mismatch");
    if (t == 0.0) return v;
    if (dense_) return dense_exponential(t) * v;

    const int m = substeps(t);
    const double dt_sub = t / m;
    const auto& st = step_for(dt_sub);
    Vec u = v;
    int remaining = m;
    if (m >= 2) {
        // Two implicit-Euler half-steps in place of the first trapezoid step.
        u = st.lu.solve(u);
        u = st.lu.solve(u);
        --remaining;
    }
    for (int k = 0; k < remaining; ++k) u = st.lu.solve(Vec(u + st.half * (a_ * u)));
    return u;
}

Vec Propagator::apply_transpose(double t, const Vec& v) const {
    if (!(t >= 0.0)) throw ValidationError("Propagator: time must be non-negative");
    if (v.size() != a_.rows()) throw ValidationError("Propagator: vector size mismatch");
    if (t == 0.0) return v;
    if (dense_) return dense_exponential(t).transpose() * v;

    const int m = substeps(t);
    const double dt_sub = t / m;
    const auto& st = step_for(dt_sub);
    Vec u = v;
    const int trapezoid = m >= 2 ? m - 1 : m;
    for (int k = 0; k < trapezoid; ++k) {
        Vec w = st.lu_t.solve(u);
        u = w + st.half * (at_ * w);
    }
    if (m >= 2) {
        u = st.lu_t.solve(u);
        u = st.lu_t.solve(u);
    }
    return u;
}

Mat Propagator::apply_block(double t, const Mat& u) const {
    if (!(t >= 0.0)) throw ValidationError("Propagator: time must be non-negative");
    if (u.rows() != a_.rows()) throw ValidationError("Propagator: block row count mismatch");
    if (t == 0.0) return u;
    if (dense_) return dense_exponential(t) * u;

    const int m = substeps(t);
    const double dt_sub = t / m;
    const auto& st = step_for(dt_sub);
    Mat w = u;
    int remaining = m;
    if (m >= 2) {
        w = st.lu.solve(w);
        w = st.lu.solve(w);
        --remaining;
    }
    for (int k = 0; k < remaining; ++k) w = st.lu.solve(Mat(w + st.half * (a_ * w)));
    return w;
}

const Mat& Propagator::dense_exponential(double t) const {
    if (!dense_) throw ValidationError("Propagator: dense exponential requested in sparse mode");
    auto it = expm_cache_.find(t);
    if (it == expm_cache_.end()) it = expm_cache_.emplace(t, Mat((t * a_dense_).exp())).first;
    return it->second;
}

Vec apply_first_order(const VectorField& field, const ScalarField& phi, const SpatialGrid& grid) {
    if (field.dim() != grid.N)
        throw ValidationError("apply_first_order: field dimension does not match the grid");
    Vec out(grid.size());
    for (long idx = 0; idx < grid.size(); ++idx) {
        const Vec x = grid.node(idx);
        out[idx] = field(x).dot(phi.grad(x));
    }
    return out;
}

Vec apply_first_order(const VectorField& field, const Vec& phi, const SpatialGrid& grid) {
    if (field.dim() != grid.N)
        throw ValidationError("apply_first_order: field dimension does not match the grid");
    if (phi.size() != grid.size())
        throw ValidationError("apply_first_order: grid function has the wrong size");

    const int N = grid.N;
    const double inv2h = 1.0 / (2.0 * grid.h());
    std::vector<long> stride(N);
    stride[0] = 1;
    for (int a = 1; a < N; ++a) stride[a] = stride[a - 1] * grid.n;

    Vec out = Vec::Zero(grid.size());
    for (long idx = 0; idx < grid.size(); ++idx) {
        const std::vector<int> mj = grid.multi(idx);
        const Vec v = field(grid.node(idx));
        double acc = 0.0;
        for (int a = 0; a < N; ++a) {
            if (v[a] == 0.0) continue;
            const int j = mj[a];
            double d;
            if (j == 0)
                d = (-3.0 * phi[idx] + 4.0 * phi[idx + stride[a]] - phi[idx + 2 * stride[a]]) *
                    inv2h;
            else if (j == grid.n - 1)
                d = (3.0 * phi[idx] - 4.0 * phi[idx - stride[a]] + phi[idx - 2 * stride[a]]) *
                    inv2h;
            else
                d = (phi[idx + stride[a]] - phi[idx - stride[a]]) * inv2h;
            acc += v[a] * d;
        }
        out[idx] = acc;
    }
    return out;
}

double sup_norm(const Vec& f) { return f.size() == 0 ? 0.0 : f.cwiseAbs().maxCoeff(); }

double sup_norm_interior(const Vec& f, const SpatialGrid& grid, int margin_cells) {
    if (f.size() != grid.size())
        throw ValidationError("sup_norm_interior: grid function has the wrong size");
    if (2 * margin_cells >= grid.n - 1)
        throw ValidationError("sup_norm_interior: margin swallows the whole grid");
    double m = 0.0;
    for (long idx = 0; idx < grid.size(); ++idx) {
        bool inside = true;
        long rem = idx;
        for (int a = 0; a < grid.N && inside; ++a) {
            const int j = static_cast<int>(rem % grid.n);
            rem /= grid.n;
            inside = j >= margin_cells && j <= grid.n - 1 - margin_cells;
        }
        if (inside) m = std::max(m, std::abs(f[idx]));
    }
    return m;
}

double sup_norm_window(const Vec& f, const SpatialGrid& grid, double halfwidth) {
    if (f.size() != grid.size())
        throw ValidationError("sup_norm_window: grid function has the wrong size");
    if (!(halfwidth > 0.0) || halfwidth > grid.L)
        throw ValidationError("sup_norm_window: window must be positive and inside the box");
    double m = 0.0;
    for (long idx = 0; idx < grid.size(); ++idx) {
        const Vec x = grid.node(idx);
        if (x.cwiseAbs().maxCoeff() <= halfwidth) m = std::max(m, std::abs(f[idx]));
    }
    return m;
}

double grid_inner(const Vec& a, const Vec& b, const SpatialGrid& grid) {
    if (a.size() != grid.size() || b.size() != grid.size())
        throw ValidationError("grid_inner: grid function has the wrong size");
    return std::pow(grid.h(), grid.N) * a.dot(b);
}

} // namespace rholab
