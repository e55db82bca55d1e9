#include "rholab/special_functions.hpp"

#include <cmath>
#include <vector>

#include "rholab/errors.hpp"

namespace rholab {

double fractional_factorial(double x) {
    if (!(x > -1.0))
        throw ValidationError("fractional_factorial: argument must exceed -1");
    return std::tgamma(x + 1.0);
}

double riemann_zeta(double s) {
    if (!(s > 1.0))
        throw NumericalGuardError("riemann_zeta: series diverges for s <= 1");
    // Accelerated alternating series: eta(s) = (1 - 2^{1-s}) zeta(s),
    // eta(s) ~ -(1/d_n) sum_{k=0}^{n-1} (-1)^k (d_k - d_n) / (k+1)^s
    // with d_k = n * sum_{i<=k} (n+i-1)! 4^i / ((n-i)! (2i)!).
    const int n = 64;
    std::vector<double> d(n + 1);
    double term = 1.0 / n; // i = 0 value of (n+i-1)! 4^i / ((n-i)! (2i)!)
    double acc = term;
    d[0] = n * acc;
    for (int i = 1; i <= n; ++i) {
        term *= 4.0 * (n + i - 1.0) * (n - i + 1.0) / ((2.0 * i) * (2.0 * i - 1.0));
        acc += term;
        d[i] = n * acc;
    }
    double eta = 0.0;
    double sign = 1.0;
    for (int k = 0; k < n; ++k) {
        eta += sign * (d[k] - d[n]) * std::pow(static_cast<double>(k + 1), -s);
        sign = -sign;
    }
    eta /= -d[n];
    return eta / (1.0 - std::pow(2.0, 1.0 - s));
}

double theta_constant(double q) {
    if (!(q > 1.0))
        throw ValidationError("theta_constant: q must exceed 1");
    const double p = (std::floor(q) + 1.0) / q;
    if (!(p > 1.0))
        throw NumericalGuardError("theta_constant: tail exponent <= 1, series diverges");
    return q * q + std::pow(2.0, p) * riemann_zeta(p);
}

namespace {

NeoclassicalResult neoclassical_eval(double q, int n, double s, double t) {
    NeoclassicalResult r;
    for (int i = 0; i <= n; ++i) {
        const double a = static_cast<double>(i) / q;
        const double b = static_cast<double>(n - i) / q;
        r.lhs += std::pow(s, a) * std::pow(t, b) /
                 (fractional_factorial(a) * fractional_factorial(b));
    }
    r.lhs /= q * q;
    const double c = static_cast<double>(n) / q;
    r.rhs = std::pow(s + t, c) / fractional_factorial(c);
    return r;
}

} // namespace

NeoclassicalResult neoclassical_check(double q, int n, double s, double t) {
    if (!(q >= 1.0)) throw ValidationError("neoclassical_check: q must be >= 1");
    if (n < 0) throw ValidationError("neoclassical_check: n must be >= 0");
    if (s < 0.0 || t < 0.0) throw ValidationError("neoclassical_check: s,t must be >= 0");
    NeoclassicalResult r = neoclassical_eval(q, n, s, t);
    const double scale = std::max(1.0, std::max(std::abs(r.lhs), std::abs(r.rhs)));
    r.pass = r.lhs <= r.rhs + 1e-12 * scale;
    return r;
}

double simplex_volume_constant(int k, double c) {
    if (k < 1) throw ValidationError("simplex_volume_constant: k must be >= 1");
    if (!(c > 0.0)) throw ValidationError("simplex_volume_constant: c must be positive");
    const double two_sqrt_pi = 2.0 * std::sqrt(M_PI);
    return 4.0 * std::pow(two_sqrt_pi, k) * c / (k * std::tgamma(0.5 * k));
}

double remainder_bound(double h_sup, double t, int k, double phi_sup) {
    if (h_sup < 0.0 || phi_sup < 0.0)
        throw ValidationError("remainder_bound: sup norms must be >= 0");
    if (t < 0.0) throw ValidationError("remainder_bound: time must be >= 0");
    if (k < 0) throw ValidationError("remainder_bound: level must be >= 0");
    return std::exp(t * h_sup) * std::pow(h_sup, 2 * (k + 1)) /
           fractional_factorial(static_cast<double>(k + 1)) * phi_sup * phi_sup;
}

} // namespace rholab
