#include "gibbsbound/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

#include "json.hpp"

#include "gibbsbound/data.hpp"

namespace gibbs {
namespace {

std::string fmt(const char* format, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

CheckResult make_check(std::string suite, std::string name, bool passed, std::string detail) {
  return {std::move(suite), std::move(name), passed, std::move(detail)};
}

// -beta_k E_k + sum_{j<=k} (beta_j - beta_{j-1}) E_{j-1} with exact E_j.
double exact_gamma_posterior_mean(const FiniteHypothesisSpace& space,
                                  const std::vector<double>& betas, std::size_t k) {
  double gamma = -betas[k] * posterior_mean_loss(space, betas[k]);
  for (std::size_t j = 1; j <= k; ++j)
    gamma += (betas[j] - betas[j - 1]) * posterior_mean_loss(space, betas[j - 1]);
  return gamma;
}

}  // namespace

bool SuiteReport::passed() const { return failures() == 0; }

std::size_t SuiteReport::failures() const {
  return static_cast<std::size_t>(
      std::count_if(checks.begin(), checks.end(), [](const CheckResult& c) { return !c.passed; }));
}

void SuiteReport::append(const SuiteReport& other) {
  checks.insert(checks.end(), other.checks.begin(), other.checks.end());
}

FiniteHypothesisSpace random_space(Rng& rng, std::size_t max_hypotheses) {
  std::uniform_int_distribution<std::size_t> size_dist(1, std::max<std::size_t>(1, max_hypotheses));
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t m = size_dist(rng);
  FiniteHypothesisSpace space;
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    space.prior.push_back(expo(rng) + 1e-12);
    total += space.prior.back();
    space.emp_losses.push_back(unif(rng));
    space.true_losses.push_back(unif(rng));
  }
  for (double& w : space.prior) w /= total;
  return space;
}

TemperatureLadder random_ladder(Rng& rng, std::size_t rungs, double beta_max) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> inc(rungs);
  double total = 0.0;
  for (double& x : inc) {
    x = unif(rng) + 1e-3;
    total += x;
  }
  std::vector<double> b{0.0};
  double acc = 0.0;
  for (double x : inc) {
    acc += x;
    b.push_back(beta_max * acc / total);
  }
  return TemperatureLadder(std::move(b));
}

SuiteReport free_energy_suite(std::uint64_t seed, const FreeEnergyOptions& opt) {
  Rng rng(derive_seed(seed, 0x6665));
  double worst = 0.0;
  std::size_t violations = 0;
  for (std::size_t s = 0; s < opt.spaces; ++s) {
    const auto space = random_space(rng);
    for (double beta : opt.betas) {
      const auto check = free_energy_identity_check(space, beta, opt.quad_steps);
      const double err = std::abs(check.lhs - check.rhs);
      worst = std::max(worst, err);
      if (!(err <= opt.tolerance)) ++violations;
    }
  }
  SuiteReport r;
  r.checks.push_back(make_check(
      "free_energy", "identity", violations == 0,
      fmt("%zu spaces x %zu temperatures, worst |lhs - rhs| = %.3e (tolerance %.0e), %zu violations",
          opt.spaces, opt.betas.size(), worst, opt.tolerance, violations)));
  return r;
}

SuiteReport monotone_suite(std::uint64_t seed, const MonotoneOptions& opt) {
  Rng rng(derive_seed(seed, 0x6d6f));
  double worst = 0.0;
  std::size_t violations = 0;
  double worst_heat = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < opt.spaces; ++s) {
    const auto space = random_space(rng);
    double prev = posterior_mean_loss(space, 0.0);
    for (std::size_t g = 1; g < opt.grid_points; ++g) {
      const double beta = opt.beta_max * static_cast<double>(g) /
                          static_cast<double>(opt.grid_points - 1);
      const double cur = posterior_mean_loss(space, beta);
      const double rise = cur - prev;
      worst = std::max(worst, rise);
      if (rise > opt.tolerance) ++violations;
      worst_heat = std::max(worst_heat, heat_capacity(space, beta));
      prev = cur;
    }
  }
  SuiteReport r;
  r.checks.push_back(make_check(
      "monotone", "posterior_mean_nonincreasing", violations == 0,
      fmt("%zu spaces x %zu points, largest increase %.3e (tolerance %.0e)", opt.spaces,
          opt.grid_points, worst, opt.tolerance)));
  r.checks.push_back(make_check("monotone", "heat_capacity_nonpositive", worst_heat <= 0.0,
                                fmt("largest heat capacity %.3e", worst_heat)));
  return r;
}

SuiteReport density_bound_suite(std::uint64_t seed, const DensityOptions& opt) {
  Rng rng(derive_seed(seed, 0x6462));
  std::uniform_int_distribution<std::size_t> rung_dist(1, 12);
  std::uniform_real_distribution<double> beta_dist(0.5, 200.0);
  double worst_slack = std::numeric_limits<double>::infinity();
  std::size_t slack_violations = 0;
  std::size_t refinement_violations = 0;
  double worst_rise = 0.0;
  for (std::size_t s = 0; s < opt.pairs; ++s) {
    const auto space = random_space(rng);
    const auto ladder = random_ladder(rng, rung_dist(rng), beta_dist(rng));
    const double beta_k = ladder.max_beta();
    const double log_z = log_partition_function(space, beta_k);
    for (std::size_t h = 0; h < space.size(); ++h) {
      const double target = -beta_k * space.emp_losses[h] - log_z;
      const double slack = exact_gamma(space, ladder, h) - target;
      worst_slack = std::min(worst_slack, slack);
      if (slack < opt.slack) ++slack_violations;
    }
    // Uniform refinement 2, 4, ..., max rungs on the same interval; h = 0.
    double prev = std::numeric_limits<double>::infinity();
    const double target = -beta_k * space.emp_losses[0] - log_z;
    for (std::size_t rungs = 2; rungs <= opt.max_refined_rungs; rungs *= 2) {
      const double g = exact_gamma(space, TemperatureLadder::uniform(beta_k, rungs), 0);
      const double atol = 1e-12 * std::max(1.0, std::abs(g));
      if (g > prev + atol || g - target < opt.slack) ++refinement_violations;
      if (std::isfinite(prev)) worst_rise = std::max(worst_rise, g - prev);
      prev = g;
    }
  }
  SuiteReport r;
  r.checks.push_back(make_check(
      "density_bound", "riemann_domination", slack_violations == 0,
      fmt("%zu space/ladder pairs, smallest slack %.3e (allowed %.0e)", opt.pairs, worst_slack,
          opt.slack)));
  r.checks.push_back(make_check(
      "density_bound", "refinement_monotone", refinement_violations == 0,
      fmt("2..%zu rungs, largest increase under refinement %.3e, %zu violations",
          opt.max_refined_rungs, worst_rise, refinement_violations)));
  return r;
}

RoundTripStats kl_round_trip(const RoundTripOptions& opt) {
  RoundTripStats st;
  for (std::size_t i = 0; i < opt.p_points; ++i) {
    const double p = opt.p_max * static_cast<double>(i) / static_cast<double>(opt.p_points - 1);
    for (std::size_t j = 0; j < opt.t_points; ++j) {
      const double t = opt.t_max * static_cast<double>(j) / static_cast<double>(opt.t_points - 1);
      const double q = binary_kl_inverse(p, t, opt.inverse_tolerance);
      if (!(q < 1.0)) continue;
      ++st.evaluated;
      const double err = std::abs(binary_kl(p, q) - t);
      if (err > st.worst_error) {
        st.worst_error = err;
        st.worst_p = p;
        st.worst_t = t;
        st.worst_q = q;
      }
      if (err <= opt.tolerance) continue;
      ++st.violations;
      const double k = binary_kl(p, q);
      const double step_down = std::abs(k - binary_kl(p, std::nextafter(q, 0.0)));
      const double step_up = std::abs(binary_kl(p, std::nextafter(q, 1.0)) - k);
      if (err > opt.tolerance + std::max(step_down, step_up)) ++st.unexplained;
    }
  }
  return st;
}

SuiteReport kl_round_trip_suite(const RoundTripOptions& opt) {
  const auto st = kl_round_trip(opt);
  const std::size_t failing = opt.resolution_aware ? st.unexplained : st.violations;
  SuiteReport r;
  r.checks.push_back(make_check(
      "kl_round_trip", opt.resolution_aware ? "round_trip_resolution_aware" : "round_trip",
      failing == 0,
      fmt("%zu grid points, %zu above %.0e, %zu beyond double resolution; worst %.3e at "
          "p=%.4f t=%.4f q=%.17g",
          st.evaluated, st.violations, opt.tolerance, st.unexplained, st.worst_error, st.worst_p,
          st.worst_t, st.worst_q)));
  return r;
}

MonteCarloStats monte_carlo_bound_validity(std::uint64_t seed, const MonteCarloOptions& opt) {
  const TemperatureLadder ladder(opt.ladder);
  const auto& betas = ladder.betas();
  FiniteHypothesisSpace space;
  for (std::size_t h = 0; h < opt.hypotheses; ++h) {
    space.prior.push_back(1.0 / static_cast<double>(opt.hypotheses));
    space.true_losses.push_back(
        0.05 + 0.4 * static_cast<double>(h) / static_cast<double>(opt.hypotheses - 1));
  }
  space.emp_losses.assign(opt.hypotheses, 0.0);

  Rng rng(derive_seed(seed, 0x6d63));
  MonteCarloStats st;
  for (std::size_t trial = 0; trial < opt.trials; ++trial) {
    // Each example errs for hypothesis h independently with rate L(h).
    for (std::size_t h = 0; h < opt.hypotheses; ++h) {
      std::binomial_distribution<std::size_t> errors(opt.n, space.true_losses[h]);
      space.emp_losses[h] = static_cast<double>(errors(rng)) / static_cast<double>(opt.n);
    }
    space.emp_01 = space.emp_losses;

    bool all_hold = true;
    for (std::size_t k = 1; k < betas.size(); ++k) {
      const double gamma = exact_gamma_posterior_mean(space, betas, k);
      const double emp = posterior_mean_loss(space, betas[k]);
      const double truth = posterior_expectation(space, betas[k], space.true_losses);
      if (!(truth <= bound_01(emp, kl_budget(gamma, opt.n, opt.delta)))) all_hold = false;
    }
    if (all_hold) ++st.posterior_mean_hold;

    const std::size_t h = sample_gibbs(space, ladder.max_beta(), rng);
    const double gamma_h = exact_gamma(space, ladder, h);
    if (space.true_losses[h] <=
        bound_01(space.emp_losses[h], kl_budget(gamma_h, opt.n, opt.delta)))
      ++st.single_draw_hold;
    ++st.trials;
  }
  return st;
}

SuiteReport monte_carlo_suite(std::uint64_t seed, const MonteCarloOptions& opt) {
  const auto st = monte_carlo_bound_validity(seed, opt);
  const double mean_rate =
      static_cast<double>(st.posterior_mean_hold) / static_cast<double>(st.trials);
  const double single_rate =
      static_cast<double>(st.single_draw_hold) / static_cast<double>(st.trials);
  SuiteReport r;
  r.checks.push_back(make_check(
      "monte_carlo", "posterior_mean_validity", mean_rate >= opt.required_rate,
      fmt("%zu/%zu trials hold at every rung (rate %.3f, required %.2f)", st.posterior_mean_hold,
          st.trials, mean_rate, opt.required_rate)));
  r.checks.push_back(make_check(
      "monte_carlo", "single_draw_validity", single_rate >= 1.0 - opt.delta,
      fmt("%zu/%zu exact draws hold (rate %.3f, required %.2f)", st.single_draw_hold, st.trials,
          single_rate, 1.0 - opt.delta)));
  return r;
}

SuiteReport verify_fixtures(const std::filesystem::path& dir) {
  using json = nlohmann::json;
  SuiteReport report;
  auto fail = [&](const std::string& name, const std::string& why) {
    report.checks.push_back(make_check("fixtures", name, false, why));
  };
  std::ifstream in(dir / "manifest.json");
  if (!in) {
    fail("manifest", "cannot open " + (dir / "manifest.json").string());
    return report;
  }
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    fail("manifest", e.what());
    return report;
  }

  for (const auto& fx : manifest.at("fixtures")) {
    const std::string name = fx.at("name").get<std::string>();
    const std::string kind = fx.at("kind").get<std::string>();
    try {
      // Each case computes `actual` from the payload via the library.
      std::function<double(const json&)> compute;
      FiniteHypothesisSpace space;
      LabeledDataset ds;
      if (kind == "space") {
        space = load_space(dir / fx.at("payload").get<std::string>());
        compute = [&](const json& c) {
          const std::string q = c.at("quantity").get<std::string>();
          if (q == "partition") return partition_function(space, c.at("beta").get<double>());
          if (q == "neg_log_partition")
            return -log_partition_function(space, c.at("beta").get<double>());
          if (q == "posterior_mean_loss")
            return posterior_mean_loss(space, c.at("beta").get<double>());
          if (q == "heat_capacity") return heat_capacity(space, c.at("beta").get<double>());
          if (q == "free_energy_quadrature")
            return free_energy_identity_check(space, c.at("beta").get<double>()).rhs;
          if (q == "exact_gamma")
            return exact_gamma(space, TemperatureLadder(c.at("ladder").get<std::vector<double>>()),
                               c.at("h").get<std::size_t>());
          throw std::invalid_argument("unknown quantity " + q);
        };
      } else if (kind == "idx" || kind == "cifar") {
        if (kind == "idx")
          ds = load_idx_files(dir / fx.at("images").get<std::string>(),
                              dir / fx.at("labels").get<std::string>());
        else
          ds = load_cifar_files({dir / fx.at("payload").get<std::string>()});
        compute = [&](const json& c) -> double {
          const std::string q = c.at("quantity").get<std::string>();
          if (q == "n") return static_cast<double>(ds.size());
          if (q == "input_dim") return static_cast<double>(ds.input_dim());
          if (q == "raw_label") return ds.raw_labels.at(c.at("index").get<std::size_t>());
          if (q == "feature") {
            const auto idx = c.at("index").get<std::vector<std::size_t>>();
            return ds.features.row(idx.at(0))[idx.at(1)];
          }
          throw std::invalid_argument("unknown quantity " + q);
        };
      } else if (kind == "kl_table") {
        compute = [](const json& c) {
          const std::string q = c.value("quantity", "kl");
          if (q == "kl") return binary_kl(c.at("p").get<double>(), c.at("q").get<double>());
          if (q == "kl_inverse")
            return binary_kl_inverse(c.at("p").get<double>(), c.at("t").get<double>());
          throw std::invalid_argument("unknown quantity " + q);
        };
      } else {
        fail(name, "unknown fixture kind " + kind);
        continue;
      }

      for (const auto& c : fx.at("checks")) {
        const std::string label = name + ":" + c.at("quantity").get<std::string>();
        if (!c.contains("origin")) {
          fail(label, "expected value has no origin");
          continue;
        }
        const double expected = c.at("expected").get<double>();
        const double tol = c.value("tolerance", 1e-12);
        const double actual = compute(c);
        const bool ok = std::abs(actual - expected) <= tol;
        report.checks.push_back(make_check(
            "fixtures", label, ok,
            fmt("actual %.15g, expected %.15g (tolerance %.0e)", actual, expected, tol)));
      }
    } catch (const std::exception& e) {
      fail(name, e.what());
    }
  }
  return report;
}

SuiteReport run_oracle_suites(const OracleOptions& opt) {
  SuiteReport all;
  all.append(free_energy_suite(opt.seed));
  all.append(monotone_suite(opt.seed));
  all.append(density_bound_suite(opt.seed));
  RoundTripOptions rt;
  rt.inverse_tolerance = opt.kl_inverse_tolerance;
  all.append(kl_round_trip_suite(rt));
  all.append(monte_carlo_suite(opt.seed));
  if (!opt.fixtures_dir.empty()) all.append(verify_fixtures(opt.fixtures_dir));
  return all;
}

}  // namespace gibbs
