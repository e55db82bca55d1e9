#include "rholab/sde_model.hpp"

#include <cmath>

#include "rholab/errors.hpp"

namespace rholab {

Vec ScalarField::grad(const Vec& x) const {
    if (gradient) return gradient(x);
    const int n = static_cast<int>(x.size());
    Vec g(n);
    Vec xp = x, xm = x;
    for (int j = 0; j < n; ++j) {
        const double step = 1e-5 * (1.0 + std::abs(x[j]));
        xp[j] = x[j] + step;
        xm[j] = x[j] - step;
        g[j] = (value(xp) - value(xm)) / (2.0 * step);
        xp[j] = x[j];
        xm[j] = x[j];
    }
    return g;
}

void SdeModel::validate() const {
    if (N < 1) throw ValidationError("model: state dimension must be >= 1");
    if (d1 < 1) throw ValidationError("model: need at least one driving noise");
    if (d2 < 1) throw ValidationError("model: need at least one observation channel");
    if (static_cast<int>(V.size()) != d1 + 1)
        throw ValidationError("model: expected d1+1 vector fields");
    if (static_cast<int>(h.size()) != d2)
        throw ValidationError("model: expected d2 sensor functions");
    for (const auto& f : V)
        if (f.dim() != N) throw ValidationError("model: vector field dimension mismatch");
    if (ufg_ell < 1) throw ValidationError("model: bracket-degree bound must be >= 1");
}

VectorField SdeModel::ito_drift() const {
    std::vector<VectorField> fields = V;
    const int dim = N;
    const int nd = d1;
    return VectorField(dim, [fields, dim, nd](const Vec& x) {
        Vec b = fields[0](x);
        for (int i = 1; i <= nd; ++i) b += 0.5 * fields[i].jacobian(x) * fields[i](x);
        return b;
    });
}

const FastScalar& SdeModel::scalar_loop() const {
    if (!fast.valid) {
        if (N != 1 || d1 != 1)
            throw ValidationError("scalar_loop: fast path requires N = d1 = 1");
        auto* self = const_cast<SdeModel*>(this);
        const VectorField b = ito_drift();
        const VectorField v1 = V[1];
        self->fast.drift = [b](double x) {
            Vec p(1);
            p[0] = x;
            return b(p)[0];
        };
        self->fast.vol = [v1](double x) {
            Vec p(1);
            p[0] = x;
            return v1(p)[0];
        };
        self->fast.sensors.clear();
        for (const auto& hi : h) {
            self->fast.sensors.push_back([hi](double x) {
                Vec p(1);
                p[0] = x;
                return hi(p);
            });
        }
        self->fast.valid = true;
    }
    return fast;
}

namespace {

ScalarField sensor_identity() {
    return {[](const Vec& x) { return x[0]; },
            [](const Vec& x) {
                Vec g(x.size());
                g.setZero();
                g[0] = 1.0;
                return g;
            }};
}

ScalarField sensor_tanh_cubic() {
    return {[](const Vec& x) { return std::tanh(x[0] * x[0] * x[0]); },
            [](const Vec& x) {
                const double u = x[0] * x[0] * x[0];
                const double sech = 1.0 / std::cosh(u);
                Vec g(x.size());
                g.setZero();
                g[0] = 3.0 * x[0] * x[0] * sech * sech;
                return g;
            }};
}

ScalarField sensor_tanh() {
    return {[](const Vec& x) { return std::tanh(x[0]); },
            [](const Vec& x) {
                const double sech = 1.0 / std::cosh(x[0]);
                Vec g(x.size());
                g.setZero();
                g[0] = sech * sech;
                return g;
            }};
}

ScalarField sensor_zero() {
    return {[](const Vec&) { return 0.0; },
            [](const Vec& x) { return Vec(Vec::Zero(x.size())); }};
}

VectorField ou_drift(double a) {
    return VectorField(
        1,
        [a](const Vec& x) {
            Vec v(1);
            v[0] = -a * x[0];
            return v;
        },
        [a](const Vec&) {
            Mat j(1, 1);
            j(0, 0) = -a;
            return j;
        });
}

SdeModel ou_model(const std::string& name, double a, double sigma, ScalarField sensor,
                  std::function<double(double)> fast_sensor) {
    SdeModel m;
    m.name = name;
    m.N = 1;
    m.d1 = 1;
    m.d2 = 1;
    Vec s(1);
    s[0] = sigma;
    m.V = {ou_drift(a), VectorField::constant(s)};
    m.h = {std::move(sensor)};
    m.ufg_ell = 1;
    // Tight scalar callbacks: constant volatility means no Ito correction.
    m.fast.drift = [a](double x) { return -a * x; };
    m.fast.vol = [sigma](double) { return sigma; };
    m.fast.sensors = {std::move(fast_sensor)};
    m.fast.valid = true;
    m.validate();
    return m;
}

} // namespace

SdeModel preset_linear_gaussian(double a, double sigma) {
    return ou_model("linear-gaussian", a, sigma, sensor_identity(),
                    [](double x) { return x; });
}

SdeModel preset_cubic_sensor(double a, double sigma) {
    return ou_model("cubic-sensor", a, sigma, sensor_tanh_cubic(),
                    [](double x) { return std::tanh(x * x * x); });
}

SdeModel preset_ou_tanh(double a, double sigma) {
    return ou_model("ou-tanh", a, sigma, sensor_tanh(), [](double x) { return std::tanh(x); });
}

SdeModel preset_bm_1d() {
    SdeModel m;
    m.name = "bm-1d";
    m.N = 1;
    m.d1 = 1;
    m.d2 = 1;
    Vec one(1);
    one[0] = 1.0;
    m.V = {VectorField::zero(1), VectorField::constant(one)};
    m.h = {sensor_zero()};
    m.ufg_ell = 1;
    m.fast.drift = [](double) { return 0.0; };
    m.fast.vol = [](double) { return 1.0; };
    m.fast.sensors = {[](double) { return 0.0; }};
    m.fast.valid = true;
    m.validate();
    return m;
}

SdeModel preset_by_name(const std::string& name) {
    if (name == "linear-gaussian") return preset_linear_gaussian();
    if (name == "cubic-sensor") return preset_cubic_sensor();
    if (name == "bm-1d") return preset_bm_1d();
    if (name == "ou-tanh") return preset_ou_tanh();
    throw ValidationError("unknown model preset: " + name);
}

} // namespace rholab
