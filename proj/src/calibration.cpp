#include "gibbsbound/calibration.hpp"

#include <string>

#include "gibbsbound/kl.hpp"

namespace gibbs {
namespace {

struct Rungs {
  std::vector<double> gamma;
  std::vector<double> emp01;
};

bool feasible(const Rungs& rungs, std::size_t n, double delta, double r) {
  for (std::size_t k = 1; k < rungs.gamma.size(); ++k)
    if (bound_01(rungs.emp01[k], kl_budget(r * rungs.gamma[k], n, delta)) <
        kCalibrationTarget)
      return false;
  return true;
}

}  // namespace

double calibration_rung_bound(const TemperatureLadder& ladder,
                              const LadderEstimates& est_random, std::size_t k,
                              double r, double delta) {
  const double gamma = gamma_nu_posterior_mean(ladder, est_random, k);
  return bound_01(est_random.mean_01[k], kl_budget(r * gamma, est_random.n, delta));
}

CalibrationResult calibrate(const TemperatureLadder& ladder,
                            const LadderEstimates& est_random, double delta,
                            std::span<const double> endpoint_losses) {
  est_random.validate(ladder);
  if (ladder.top() < 1)
    throw std::invalid_argument("calibration needs at least one rung above beta = 0");

  if (!endpoint_losses.empty() && endpoint_losses.size() != ladder.size())
    throw std::invalid_argument("endpoint losses must cover every rung");

  Rungs rungs;
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    rungs.gamma.push_back(endpoint_losses.empty()
                              ? gamma_nu_posterior_mean(ladder, est_random, k)
                              : gamma_nu(ladder, est_random, k, endpoint_losses[k]));
    rungs.emp01.push_back(est_random.mean_01[k]);
  }
  const std::size_t n = est_random.n;

  CalibrationResult result;
  result.rung_gammas = rungs.gamma;
  double r = 0.0;
  if (!feasible(rungs, n, delta, 0.0)) {
    double lo = 0.0;
    double hi = 1.0;
    while (!feasible(rungs, n, delta, hi)) {
      ++result.iterations;
      lo = hi;
      hi *= 2.0;
      if (hi > kCalibrationMaxFactor)
        throw CalibrationInfeasible(
            "no calibration factor up to 2^10 makes the random-label bound vacuous "
            "at every rung");
    }
    // feasible(hi), !feasible(lo). Halting at half the tolerance keeps
    // r (1 - tolerance) strictly inside the infeasible side.
    while (hi - lo > 0.5 * kCalibrationRelTolerance * hi) {
      ++result.iterations;
      const double mid = 0.5 * (lo + hi);
      if (feasible(rungs, n, delta, mid))
        hi = mid;
      else
        lo = mid;
    }
    r = hi;
  }

  result.r = r;
  for (std::size_t k = 0; k < ladder.size(); ++k)
    result.rung_bounds.push_back(
        bound_01(rungs.emp01[k], kl_budget(r * rungs.gamma[k], n, delta)));
  return result;
}

}  // namespace gibbs
