#pragma once

// Calibration factor r: the smallest multiplier of the estimated gamma for
// which the bound on randomly labeled training data is vacuous (>= 1/2) at
// every rung beta_1..beta_K. Uses training data only.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "gibbsbound/bounds.hpp"

namespace gibbs {

inline constexpr double kCalibrationTarget = 0.5;
inline constexpr double kCalibrationRelTolerance = 1e-6;
inline constexpr double kCalibrationMaxFactor = 1024.0;  // 2^10

class CalibrationInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CalibrationResult {
  double r = 0.0;
  /// Random-label bound at each rung 0..K, evaluated at r.
  std::vector<double> rung_bounds;
  /// Posterior-mean gamma over the partial ladder beta_0..beta_k.
  std::vector<double> rung_gammas;
  std::size_t iterations = 0;
};

/// Random-label bound at rung k (k >= 1) for a given multiplier r.
double calibration_rung_bound(const TemperatureLadder& ladder,
                              const LadderEstimates& est_random, std::size_t k,
                              double r, double delta);

/// Throws CalibrationInfeasible when no r <= 2^10 makes every rung vacuous.
/// `endpoint_losses`, when non-empty, replaces E_k in the -beta_k L_h term
/// of each rung's gamma (the drawn-hypothesis reading).
CalibrationResult calibrate(const TemperatureLadder& ladder,
                            const LadderEstimates& est_random, double delta,
                            std::span<const double> endpoint_losses = {});

}  // namespace gibbs
