#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rholab/vector_field.hpp"

namespace rholab {

/// Scalar observable with gradient evaluator (sensor functions, potentials).
struct ScalarField {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient; // optional; finite differences if missing

    double operator()(const Vec& x) const { return value(x); }
    Vec grad(const Vec& x) const;
};

/// Scalar-argument callbacks for the Monte Carlo inner loops.  The generic
/// VectorField interface allocates per evaluation, which is far too slow for
/// 1e9 path-steps; models with N = d1 = 1 carry these plain-double versions.
struct FastScalar {
    std::function<double(double)> drift; // Ito-corrected drift b
    std::function<double(double)> vol;   // V_1
    std::vector<std::function<double(double)>> sensors;
    bool valid = false;
};

/// The model data: signal fields V_0..V_d1 (Stratonovich form), sensor
/// functions h_1..h_d2, and the bracket-degree bound ell used by the
/// bracket-Sobolev norm.  ell is asserted by configuration, never verified.
struct SdeModel {
    std::string name;
    int N = 1;
    int d1 = 1;
    int d2 = 1;
    std::vector<VectorField> V; // indexed 0..d1
    std::vector<ScalarField> h; // indexed 0..d2-1
    int ufg_ell = 1;
    FastScalar fast;

    void validate() const;

    /// Ito-corrected drift b = V_0 + (1/2) sum_i (DV_i) V_i, the drift of the
    /// Euler scheme.  Its Jacobian is finite-difference (second derivatives
    /// of the fields are not part of the model data).
    VectorField ito_drift() const;

    /// The scalar fast path, built on demand from the generic fields when the
    /// preset did not install one.  Only valid for N = d1 = 1.
    const FastScalar& scalar_loop() const;
};

/// Ornstein-Uhlenbeck signal dX = -a X dt + sigma dB with identity sensor
/// h(x) = x.  The baseline linear model with an exact Riccati oracle.
SdeModel preset_linear_gaussian(double a = 1.0, double sigma = 1.0);

/// OU signal with saturated cubic sensor h(x) = tanh(x^3); the bounded
/// nonlinear benchmark (sup|h| = 1).
SdeModel preset_cubic_sensor(double a = 1.0, double sigma = 1.0);

/// Pure 1-D Brownian motion (V0 = 0, V1 = 1) with a zero sensor; the model
/// whose semigroup is the classical heat semigroup.
SdeModel preset_bm_1d();

/// OU signal with bounded sensor h(x) = tanh(x); used by experiments that
/// need sup|h| <= 1 together with linear dynamics.
SdeModel preset_ou_tanh(double a = 1.0, double sigma = 1.0);

/// Look up any of the named presets above ("linear-gaussian", "cubic-sensor",
/// "bm-1d", "ou-tanh"); throws ValidationError for unknown names.
SdeModel preset_by_name(const std::string& name);

} // namespace rholab
