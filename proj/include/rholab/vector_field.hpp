#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "rholab/multi_index.hpp"

namespace rholab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Smooth vector field on R^N with value and Jacobian evaluators.  The
/// Jacobian entry (i,j) is dV^i/dx^j.  Fields constructed without an analytic
/// Jacobian differentiate their value by centered finite differences with a
/// step proportional to 1+|x| per coordinate.
class VectorField {
public:
    VectorField() = default;
    VectorField(int dim, std::function<Vec(const Vec&)> value)
        : dim_(dim), value_(std::move(value)) {}
    VectorField(int dim, std::function<Vec(const Vec&)> value,
                std::function<Mat(const Vec&)> jacobian)
        : dim_(dim), value_(std::move(value)), jac_(std::move(jacobian)) {}

    int dim() const { return dim_; }
    Vec operator()(const Vec& x) const { return value_(x); }
    Mat jacobian(const Vec& x) const;
    /// div V = trace of the Jacobian.
    double divergence(const Vec& x) const { return jacobian(x).trace(); }

    bool has_analytic_jacobian() const { return static_cast<bool>(jac_); }

    static VectorField zero(int dim);
    static VectorField constant(Vec v);
    /// 1-D field x -> f(x) with analytic derivative f'.
    static VectorField scalar(std::function<double(double)> f,
                              std::function<double(double)> df);

private:
    int dim_ = 0;
    std::function<Vec(const Vec&)> value_;
    std::function<Mat(const Vec&)> jac_;
};

/// Lie bracket [V,W](x) = DW(x) V(x) - DV(x) W(x).  Uses the operands'
/// (analytic, if available) Jacobians for its value; the returned field's own
/// Jacobian falls back to finite differences of that value.
VectorField lie_bracket(const VectorField& v, const VectorField& w);

/// Iterated bracket field: V_[(i)] = fields[i], V_[a*i] = [V_[a], fields[i]].
/// `fields` is indexed 0..d1.  alpha must be nonempty, different from (0),
/// with entries in range; otherwise throws ValidationError.
VectorField bracket_field(const std::vector<VectorField>& fields, const MultiIndex& alpha);

} // namespace rholab
