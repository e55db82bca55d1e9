#include "rholab/vector_field.hpp"

#include <cmath>

#include "rholab/errors.hpp"

namespace rholab {

Mat VectorField::jacobian(const Vec& x) const {
    if (jac_) return jac_(x);
    // Centered finite differences, one column per coordinate.
    Mat J(dim_, dim_);
    Vec xp = x, xm = x;
    for (int j = 0; j < dim_; ++j) {
        const double step = 1e-5 * (1.0 + std::abs(x[j]));
        xp[j] = x[j] + step;
        xm[j] = x[j] - step;
        J.col(j) = (value_(xp) - value_(xm)) / (2.0 * step);
        xp[j] = x[j];
        xm[j] = x[j];
    }
    return J;
}

VectorField VectorField::zero(int dim) {
    return VectorField(
        dim, [dim](const Vec&) { return Vec(Vec::Zero(dim)); },
        [dim](const Vec&) { return Mat(Mat::Zero(dim, dim)); });
}

VectorField VectorField::constant(Vec v) {
    const int dim = static_cast<int>(v.size());
    return VectorField(
        dim, [v](const Vec&) { return v; },
        [dim](const Vec&) { return Mat(Mat::Zero(dim, dim)); });
}

VectorField VectorField::scalar(std::function<double(double)> f,
                                std::function<double(double)> df) {
    return VectorField(
        1,
        [f](const Vec& x) {
            Vec out(1);
            out[0] = f(x[0]);
            return out;
        },
        [df](const Vec& x) {
            Mat out(1, 1);
            out(0, 0) = df(x[0]);
            return out;
        });
}

VectorField lie_bracket(const VectorField& v, const VectorField& w) {
    if (v.dim() != w.dim())
        throw ValidationError("lie_bracket: dimension mismatch");
    const int dim = v.dim();
    return VectorField(dim, [v, w](const Vec& x) {
        return Vec(w.jacobian(x) * v(x) - v.jacobian(x) * w(x));
    });
}

VectorField bracket_field(const std::vector<VectorField>& fields, const MultiIndex& alpha) {
    if (alpha.empty())
        throw ValidationError("bracket_field: empty multi-index has no bracket field");
    if (alpha.size() == 1 && alpha[0] == 0)
        throw ValidationError("bracket_field: (0) is excluded from the bracket index set");
    const int d1 = static_cast<int>(fields.size()) - 1;
    for (int letter : alpha)
        if (letter < 0 || letter > d1)
            throw ValidationError("bracket_field: letter out of range in " + to_string(alpha));
    VectorField out = fields[static_cast<std::size_t>(alpha[0])];
    for (std::size_t k = 1; k < alpha.size(); ++k)
        out = lie_bracket(out, fields[static_cast<std::size_t>(alpha[k])]);
    return out;
}

} // namespace rholab
