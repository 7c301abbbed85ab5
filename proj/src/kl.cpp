#include "gibbsbound/kl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gibbs {

double binary_kl(double p, double q) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  p = std::clamp(p, 0.0, 1.0);
  q = std::clamp(q, 0.0, 1.0);
  if (q == 0.0) return p == 0.0 ? 0.0 : inf;
  if (q == 1.0) return p == 1.0 ? 0.0 : inf;
  double value = 0.0;
  if (p > 0.0) value += p * std::log(p / q);
  if (p < 1.0) value += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
  // Rounding can push the sum a hair below zero when q is within an ulp of p.
  return std::max(value, 0.0);
}

double binary_kl_inverse(double p, double t, double tolerance) {
  p = std::clamp(p, 0.0, 1.0);
  if (!(t > 0.0)) return p;
  if (p >= 1.0) return 1.0;

  // Invariant: binary_kl(p, lo) < t <= binary_kl(p, hi). kl(p, 1) = inf.
  double lo = p;
  double hi = 1.0;
  for (int i = 0; i < kKlInverseMaxIterations && hi - lo > tolerance; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (binary_kl(p, mid) >= t)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

}  // namespace gibbs
