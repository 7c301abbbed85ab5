#include "doctest.h"
#include "gibbsbound/oracle.hpp"

using namespace gibbs;

namespace {
void require_passed(const SuiteReport& rep) {
  for (const auto& c : rep.checks) {
    INFO(c.suite << "/" << c.name << ": " << c.detail);
    CHECK(c.passed);
  }
  CHECK(rep.passed());
}
}  // namespace

TEST_CASE("oracle suites pass") {
  require_passed(free_energy_suite(1));
  require_passed(monotone_suite(2));
  require_passed(density_bound_suite(3));
  require_passed(kl_round_trip_suite());
}

TEST_CASE("fixtures verify") {
  const auto rep = verify_fixtures(GIBBSBOUND_FIXTURE_DIR);
  CHECK(rep.checks.size() >= 10);
  require_passed(rep);
  CHECK_FALSE(verify_fixtures("/nonexistent/fixture/dir").passed());
}

TEST_CASE("Monte Carlo validity on a finite class") {
  MonteCarloOptions opt;
  opt.trials = 100;
  const auto stats = monte_carlo_bound_validity(77, opt);
  CHECK(stats.trials == 100);
  CHECK(static_cast<double>(stats.posterior_mean_hold) / stats.trials >= 0.99);
  CHECK(static_cast<double>(stats.single_draw_hold) / stats.trials >= 1.0 - opt.delta);
}

TEST_CASE("suites are deterministic and sensitive to corruption") {
  const auto a = free_energy_suite(5), b = free_energy_suite(5);
  REQUIRE(a.checks.size() == b.checks.size());
  for (std::size_t i = 0; i < a.checks.size(); ++i) CHECK(a.checks[i].detail == b.checks[i].detail);

  RoundTripOptions loose;
  loose.inverse_tolerance = 1e-2;
  CHECK_FALSE(kl_round_trip_suite(loose).passed());
}
