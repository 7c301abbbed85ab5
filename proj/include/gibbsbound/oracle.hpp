#pragma once

// Validation suites on finite hypothesis spaces and the reference fixture
// checker. Each suite returns a list of named checks; nothing throws on a
// failed check.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gibbsbound/bounds.hpp"
#include "gibbsbound/exact_gibbs.hpp"
#include "gibbsbound/kl.hpp"
#include "gibbsbound/rng.hpp"

namespace gibbs {

struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SuiteReport {
  std::vector<CheckResult> checks;

  bool passed() const;
  std::size_t failures() const;
  void append(const SuiteReport& other);
};

/// Random space with 1..max_hypotheses hypotheses, Dirichlet(1) prior and
/// uniform empirical and true losses.
FiniteHypothesisSpace random_space(Rng& rng, std::size_t max_hypotheses = 64);

/// Ladder 0 < b_1 < ... < b_rungs with increments drawn on (0, beta_max].
TemperatureLadder random_ladder(Rng& rng, std::size_t rungs, double beta_max);

struct FreeEnergyOptions {
  std::size_t spaces = 100;
  std::vector<double> betas{1.0, 10.0, 50.0};
  std::size_t quad_steps = 4096;
  double tolerance = 1e-8;
};
SuiteReport free_energy_suite(std::uint64_t seed, const FreeEnergyOptions& opt = {});

struct MonotoneOptions {
  std::size_t spaces = 100;
  std::size_t grid_points = 20;
  double beta_max = 100.0;
  double tolerance = 1e-12;
};
SuiteReport monotone_suite(std::uint64_t seed, const MonotoneOptions& opt = {});

struct DensityOptions {
  std::size_t pairs = 100;
  double slack = -1e-10;
  /// Refinement runs through 2, 4, ..., max_refined_rungs uniform rungs.
  std::size_t max_refined_rungs = 64;
};
SuiteReport density_bound_suite(std::uint64_t seed, const DensityOptions& opt = {});

struct RoundTripOptions {
  std::size_t p_points = 100;
  std::size_t t_points = 100;
  double p_max = 0.99;
  double t_max = 3.0;
  double tolerance = 1e-9;
  /// Passed to binary_kl_inverse.
  double inverse_tolerance = kDefaultKlInverseTolerance;
  /// Widen the per-point tolerance by the kl step to the neighbouring
  /// doubles of q, the resolution limit of any double-valued inverse.
  bool resolution_aware = true;
};

struct RoundTripStats {
  std::size_t evaluated = 0;
  std::size_t violations = 0;
  /// Violations not explained by the q resolution of a double.
  std::size_t unexplained = 0;
  double worst_error = 0.0;
  double worst_p = 0.0, worst_t = 0.0, worst_q = 0.0;
};
RoundTripStats kl_round_trip(const RoundTripOptions& opt);
SuiteReport kl_round_trip_suite(const RoundTripOptions& opt = {});

struct MonteCarloOptions {
  std::size_t hypotheses = 16;
  std::size_t n = 50;
  double delta = 0.05;
  std::size_t trials = 200;
  std::vector<double> ladder{0.0, 5.0, 10.0, 25.0, 50.0};
  double required_rate = 0.99;
};

struct MonteCarloStats {
  std::size_t trials = 0;
  /// Trials where the posterior-mean inequality held at every rung.
  std::size_t posterior_mean_hold = 0;
  /// Trials where the single-draw inequality held for an exact draw at the
  /// top rung.
  std::size_t single_draw_hold = 0;
};
MonteCarloStats monte_carlo_bound_validity(std::uint64_t seed, const MonteCarloOptions& opt);
SuiteReport monte_carlo_suite(std::uint64_t seed, const MonteCarloOptions& opt = {});

/// Recomputes every expected value listed in dir/manifest.json.
SuiteReport verify_fixtures(const std::filesystem::path& dir);

struct OracleOptions {
  std::uint64_t seed = 20251014;
  double kl_inverse_tolerance = kDefaultKlInverseTolerance;
  std::filesystem::path fixtures_dir;  // empty skips fixture verification
};
SuiteReport run_oracle_suites(const OracleOptions& opt);

}  // namespace gibbs
