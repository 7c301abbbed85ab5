#include <cmath>

#include "doctest.h"
#include "gibbsbound/calibration.hpp"
#include "gibbsbound/kl.hpp"

using namespace gibbs;

namespace {

// Random-label estimates whose loss decreases along the ladder.
LadderEstimates decreasing(std::size_t rungs, std::size_t n) {
  LadderEstimates est;
  est.n = n;
  for (std::size_t k = 0; k < rungs; ++k) {
    est.mean_loss.push_back(0.5 - 0.05 * static_cast<double>(k));
    est.mean_01.push_back(0.5 - 0.04 * static_cast<double>(k));
  }
  return est;
}

TemperatureLadder scaled(const TemperatureLadder& l, double c) {
  std::vector<double> b = l.betas();
  for (auto& v : b) v *= c;
  return TemperatureLadder(b);
}

}  // namespace

TEST_CASE("calibration is zero when every rung is already vacuous") {
  LadderEstimates est;
  est.n = 100;
  est.mean_loss = {0.6, 0.5, 0.4};
  est.mean_01 = {0.5, 0.5, 0.5};
  const auto res = calibrate(TemperatureLadder({0.0, 10.0, 20.0}), est, 0.01);
  CHECK(res.r == 0.0);
  REQUIRE(res.rung_bounds.size() == 3);
  for (std::size_t k = 1; k < 3; ++k) CHECK(res.rung_bounds[k] >= 0.5);
}

TEST_CASE("closed-form single-rung calibration") {
  // Gamma = n and a negligible log term leave r = kl(0.4, 0.5).
  const std::size_t n = 1000000000000ULL;
  LadderEstimates est;
  est.n = n;
  est.mean_loss = {0.6, 0.4};
  est.mean_01 = {0.5, 0.4};
  const double beta1 = static_cast<double>(n) / 0.2;
  const auto res = calibrate(TemperatureLadder({0.0, beta1}), est, 0.01);
  const double expect = 0.4 * std::log(0.8) + 0.6 * std::log(1.2);
  CHECK(expect == doctest::Approx(0.020136).epsilon(1e-4));
  CHECK(res.r == doctest::Approx(expect).epsilon(1e-5));
  CHECK(std::abs(res.rung_gammas[1] - static_cast<double>(n)) <= 1e-3);
}

TEST_CASE("returned r is feasible, minimal and scale covariant") {
  const std::size_t n = 500;
  const TemperatureLadder ladder({0.0, 25.0, 50.0, 100.0, 200.0, 400.0});
  const auto est = decreasing(ladder.size(), n);
  const double delta = 0.01;
  const auto res = calibrate(ladder, est, delta);
  REQUIRE(res.r > 0.0);

  bool violated = false;
  for (std::size_t k = 1; k < ladder.size(); ++k) {
    CHECK(calibration_rung_bound(ladder, est, k, res.r, delta) >= 0.5 - 1e-9);
    CHECK(res.rung_bounds[k] == doctest::Approx(calibration_rung_bound(ladder, est, k, res.r, delta)));
    if (calibration_rung_bound(ladder, est, k, res.r * (1 - 1e-5), delta) < 0.5) violated = true;
  }
  CHECK(violated);

  for (double c : {0.5, 2.0, 8.0}) {
    const auto rc = calibrate(scaled(ladder, c), est, delta);
    CHECK(rc.r == doctest::Approx(res.r / c).epsilon(2e-6));
  }
}

TEST_CASE("rung bound is nondecreasing in r") {
  const TemperatureLadder ladder({0.0, 50.0, 100.0});
  const auto est = decreasing(3, 400);
  double prev = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double b = calibration_rung_bound(ladder, est, 2, 0.05 * i, 0.01);
    CHECK(b >= prev);
    prev = b;
  }
}

TEST_CASE("drawn-hypothesis reading replaces the endpoint loss") {
  const TemperatureLadder ladder({0.0, 50.0, 100.0});
  LadderEstimates est;
  est.n = 400;
  est.mean_loss = {0.5, 0.45, 0.4};
  est.mean_01 = {0.5, 0.3, 0.2};
  const auto pm = calibrate(ladder, est, 0.01);
  REQUIRE(pm.r > 0.0);
  const auto same = calibrate(ladder, est, 0.01, est.mean_loss);
  CHECK(pm.r == same.r);
  const std::vector<double> lower{0.5, 0.40, 0.35};
  const auto drawn = calibrate(ladder, est, 0.01, lower);
  // A smaller endpoint loss raises gamma, so less scaling is needed.
  CHECK(drawn.r < pm.r);
}

TEST_CASE("degenerate random-label run is infeasible") {
  LadderEstimates est;
  est.n = 100000;
  est.mean_loss = {0.2, 0.2, 0.2};
  est.mean_01 = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(calibrate(TemperatureLadder({0.0, 1.0, 2.0}), est, 0.01),
                  CalibrationInfeasible);
}
