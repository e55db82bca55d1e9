#pragma once

namespace rholab {

/// (x)! = Gamma(x+1) for x > -1.  Fractional factorials appear throughout the
/// binomial-type bounds on iterated-integral levels.
double fractional_factorial(double x);

/// Riemann zeta for real s > 1, evaluated through the alternating series with
/// Chebyshev-polynomial acceleration (error ~ (3+sqrt 8)^{-n}).
double riemann_zeta(double s);

/// theta(q) = q^2 + sum_{r>=3} (2/(r-2))^p with p = (floor(q)+1)/q,
/// i.e. q^2 + 2^p * zeta(p).  Requires q > 1 so that p > 1 and the tail
/// converges; the factorial normalisation (x/theta)! built from this constant
/// keeps level products of a multiplicative series summable.
double theta_constant(double q);

struct NeoclassicalResult {
    double lhs = 0.0;
    double rhs = 0.0;
    bool pass = false;
};

/// Fractional binomial ("neo-classical") inequality:
///   (1/q^2) sum_{i=0}^n s^{i/q} t^{(n-i)/q} / ((i/q)! ((n-i)/q)!)
///       <= (s+t)^{n/q} / (n/q)!
/// for q >= 1, n >= 0, s,t >= 0.  Both sides are evaluated via Gamma.
/// `pass` tolerates -1e-12 slack, measured relative to max(1, rhs) because
/// both sides reach ~1e7 at the large end of the sampled parameter box and an
/// absolute 1e-12 would be below double roundoff there.
NeoclassicalResult neoclassical_check(double q, int n, double s, double t);

/// a_k = 4 (2 sqrt(pi))^k c / (k Gamma(k/2)): the constant bounding the
/// volume growth of k-level coefficient vectors on the unit hypersphere.
double simplex_volume_constant(int k, double c);

/// Mean-square remainder bound for truncating the observation-chaos series
/// after level k:  e^{t h_sup} * h_sup^{2(k+1)} / (k+1)! * phi_sup^2.
double remainder_bound(double h_sup, double t, int k, double phi_sup);

} // namespace rholab
