#pragma once

// Binary relative entropy between Bernoulli means and its partial inverse
// in the second argument.

namespace gibbs {

// Zero runs the bisection down to adjacent doubles (capped by the iteration
// limit); an absolute 1e-12 in q leaves kl errors near 1e-9 once q > 0.999.
inline constexpr double kDefaultKlInverseTolerance = 0.0;
inline constexpr int kKlInverseMaxIterations = 200;

/// kl(p || q) for Bernoulli means, with 0 ln 0 = 0. Returns +inf when q sits
/// on an endpoint the empirical rate p does not match.
double binary_kl(double p, double q);

/// Smallest q >= p with binary_kl(p, q) >= t, found by bisection on [p, 1].
/// Returns 1 when no such q below 1 exists (a vacuous bound).
double binary_kl_inverse(double p, double t,
                         double tolerance = kDefaultKlInverseTolerance);

}  // namespace gibbs
