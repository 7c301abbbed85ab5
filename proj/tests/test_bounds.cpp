#include <cmath>
#include <random>

#include "doctest.h"
#include "gibbsbound/bounds.hpp"
#include "gibbsbound/exact_gibbs.hpp"
#include "gibbsbound/kl.hpp"
#include "gibbsbound/oracle.hpp"

using namespace gibbs;

TEST_CASE("temperature ladder") {
  const auto def = TemperatureLadder::standard();
  CHECK(def.betas() == std::vector<double>{0, 500, 1000, 2000, 4000, 8000, 16000, 32000, 64000});
  CHECK(def.top() == 8);
  CHECK(TemperatureLadder::parse("0, 25,50").betas() == std::vector<double>{0, 25, 50});
  CHECK(TemperatureLadder::parse(def.to_string()).betas() == def.betas());
  CHECK_THROWS(TemperatureLadder({1.0, 2.0}));
  CHECK_THROWS(TemperatureLadder({0.0, 2.0, 2.0}));
  CHECK_THROWS(TemperatureLadder({}));
  CHECK_THROWS(TemperatureLadder::parse("0,abc"));
  CHECK(def.prefix(2).betas() == std::vector<double>{0, 500, 1000});
}

TEST_CASE("gamma_nu examples") {
  LadderEstimates est;
  est.mean_loss = {0.5, 0.25};
  est.mean_01 = {0.5, 0.25};
  est.n = 10;
  const TemperatureLadder ladder({0.0, std::log(3.0)});
  CHECK(gamma_nu(ladder, est, 1, 0.0) == doctest::Approx(std::log(3.0) * 0.5).epsilon(1e-15));

  LadderEstimates flat;
  flat.mean_loss = {0.3, 0.3};
  flat.mean_01 = {0.3, 0.3};
  flat.n = 10;
  CHECK(gamma_nu_posterior_mean(TemperatureLadder({0.0, 7.0}), flat, 1) == doctest::Approx(0.0));
}

TEST_CASE("gamma_nu with exact means equals exact_gamma") {
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    const auto space = random_space(rng, 32);
    const auto ladder = random_ladder(rng, 6, 80.0);
    LadderEstimates est;
    est.n = 100;
    for (double b : ladder.betas()) {
      est.mean_loss.push_back(posterior_mean_loss(space, b));
      est.mean_01.push_back(posterior_mean_loss(space, b));
    }
    for (std::size_t h = 0; h < space.size(); ++h)
      CHECK(std::abs(gamma_nu(ladder, est, ladder.top(), space.emp_losses[h]) -
                     exact_gamma(space, ladder, h)) <= 1e-12 * std::max(1.0, ladder.max_beta()));
    // Non-increasing estimates make the posterior-mean form nonnegative.
    for (std::size_t k = 1; k < ladder.size(); ++k)
      CHECK(gamma_nu_posterior_mean(ladder, est, k) >= -1e-12);
  }
}

TEST_CASE("kl budget and the 0-1 bound") {
  CHECK(kl_budget(2.0, 100, 0.05) == doctest::Approx((2.0 + std::log(400.0)) / 100).epsilon(1e-15));
  CHECK(kl_budget(2.0, 100, 0.05) == doctest::Approx(0.079915).epsilon(1e-5));
  CHECK(kl_budget(0.0, 100000000, 0.01) < 1e-6);
  CHECK(kl_budget(-1e6, 100, 0.05) == 0.0);
  CHECK_THROWS(kl_budget(1.0, 100, 0.0));
  CHECK_THROWS(kl_budget(1.0, 100, 1.0));
  CHECK_FALSE(kl_budget_sample_size_ok(7));
  CHECK(kl_budget_sample_size_ok(8));

  const double budget = (2.0 + std::log(400.0)) / 100;
  CHECK(bound_01(0.0, budget) == doctest::Approx(1.0 - std::exp(-budget)).epsilon(1e-12));
  CHECK(bound_01(0.0, budget) == doctest::Approx(0.076806).epsilon(1e-5));
  CHECK(bound_01(0.3, 0.0) == 0.3);
  CHECK(bound_01(0.5, 1e9) == 1.0);
}

TEST_CASE("bound is nondecreasing in gamma and r") {
  for (double p : {0.0, 0.1, 0.4}) {
    double prev = 0.0;
    for (int i = 0; i <= 200; ++i) {
      const double b = bound_01(p, kl_budget(0.5 * i, 500, 0.01));
      CHECK(b >= prev);
      CHECK(b >= p);
      CHECK(b <= 1.0);
      prev = b;
    }
  }
}

TEST_CASE("sub-Gaussian bound") {
  const auto b = subgaussian_bound(1.0, 1.0, 100, 0.05);
  REQUIRE(b.has_value());
  CHECK(*b == doctest::Approx(std::sqrt(2 * (1.01 + std::log(2020.0)) / 100)).epsilon(1e-14));
  CHECK(*b == doctest::Approx(0.41524).epsilon(1e-4));
  CHECK(*subgaussian_bound(3.0, 0.0, 100, 0.05) == 0.0);
  CHECK_FALSE(subgaussian_bound(0.5, 1.0, 100, 0.05).has_value());
}

TEST_CASE("stability penalties") {
  const TemperatureLadder ladder({0.0, 50.0, 100.0});
  StabilityInputs inp;
  inp.loss_bound = 1.0;
  inp.proxy_bound = 1.0;
  inp.epsilon = {0.01, 0.01, 0.01};
  inp.mode = PenaltyMode::TVPosteriorMean;
  CHECK(stability_penalty(inp, ladder, 2) == doctest::Approx(101 * 0.01 + 100 * 0.01).epsilon(1e-14));
  inp.mode = PenaltyMode::W2PosteriorMean;
  CHECK(stability_penalty(inp, ladder, 2) == doctest::Approx(2.01).epsilon(1e-14));
  inp.mode = PenaltyMode::TVSingleDraw;
  CHECK(stability_penalty(inp, ladder, 2) ==
        doctest::Approx(1 + 100 + std::log(0.02) + 1.0).epsilon(1e-14));

  inp.epsilon = {0.0, 0.0, 0.0};
  for (auto mode : {PenaltyMode::TVSingleDraw, PenaltyMode::TVPosteriorMean,
                    PenaltyMode::W2PosteriorMean}) {
    inp.mode = mode;
    CHECK(stability_penalty(inp, ladder, 2) == 0.0);
  }
  inp.epsilon = {0.01, -0.1, 0.0};
  CHECK_THROWS(stability_penalty(inp, ladder, 2));
  CHECK(parse_penalty_mode(penalty_mode_name(PenaltyMode::W2PosteriorMean)) ==
        PenaltyMode::W2PosteriorMean);
}

TEST_CASE("ULA divergence calculators") {
  TheoryParams tp;
  tp.lsi_constant = 1.0;
  tp.hessian_bound = 1.0;
  tp.step = 1e-3;
  tp.steps = 0.0;
  tp.dimension = 10.0;
  tp.beta = 10.0;
  tp.prior_width = 1.0;
  tp.initial_kl = 5.0;
  const double L = 10.0 * 1.0 + 1.0;
  const auto u = ula_divergence(tp);
  CHECK(u.kl == doctest::Approx(5.0 + 8e-3 * 10 * L * L / 10).epsilon(1e-14));
  CHECK(u.w2 == doctest::Approx(2.0 * 5.0 + 16e-3 * 10 * L * L / 10).epsilon(1e-14));
  CHECK(u.tv == doctest::Approx(std::sqrt(5.0) + 2 * std::sqrt(1e-3 * 10 / 10) * L).epsilon(1e-14));
  CHECK(u.step_admissible);  // 1e-3 <= 1 / (4 * 121)

  tp.steps = 1e12;
  const auto late = ula_divergence(tp);
  CHECK(late.kl == doctest::Approx(8e-3 * 10 * L * L / 10).epsilon(1e-12));

  tp.step = 1e-2;
  CHECK_FALSE(ula_divergence(tp).step_admissible);
  tp.step = 1.0 / (4 * L * L);
  CHECK(ula_divergence(tp).step_admissible);
  tp.dimension = 0.0;
  CHECK_THROWS(ula_divergence(tp));
}

TEST_CASE("kl doubling diagnostic") {
  CHECK(kl_doubling_diagnostic(0.3, 0.3, 100.0) == 0.0);
  CHECK(kl_doubling_diagnostic(0.30, 0.25, 1000.0) == doctest::Approx(50.0));
  CHECK(kl_doubling_diagnostic(0.2, 0.3, 10.0) == 0.0);
}

TEST_CASE("assemble_report composes the three operations") {
  const TemperatureLadder ladder({0.0, 100.0, 200.0});
  LadderEstimates est;
  est.mean_loss = {0.5, 0.3, 0.2};
  est.mean_01 = {0.5, 0.25, 0.1};
  est.n = 1000;
  ReportOptions opt;
  opt.delta = 0.01;
  opt.r = 0.5;
  opt.single_draws = std::vector<SingleDraw>{{0.5, 0.5}, {0.31, 0.26}, {0.18, 0.09}};
  const auto rep = assemble_report(ladder, est, opt);
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.rows[0].gamma == 0.0);
  for (std::size_t k = 1; k < 3; ++k) {
    const double g = gamma_nu(ladder, est, k, est.mean_loss[k]);
    CHECK(rep.rows[k].gamma == doctest::Approx(g));
    const double budget = kl_budget(0.5 * g, 1000, 0.01);
    CHECK(rep.rows[k].budget == doctest::Approx(budget));
    CHECK(rep.rows[k].bound01 == doctest::Approx(binary_kl_inverse(est.mean_01[k], budget)));
    const auto& d = (*opt.single_draws)[k];
    CHECK(*rep.rows[k].bound01_single ==
          doctest::Approx(bound_01(d.zero_one, kl_budget(0.5 * gamma_nu(ladder, est, k, d.loss), 1000, 0.01))));
    CHECK(rep.rows[k].bound01 >= est.mean_01[k]);
  }
  CHECK_FALSE(rep.small_sample_warning);

  LadderEstimates flat;
  flat.mean_loss = {0.4, 0.4, 0.4};
  flat.mean_01 = {0.5, 0.5, 0.5};
  flat.n = 5;
  const auto f = assemble_report(ladder, flat, {});
  for (const auto& row : f.rows) CHECK(row.bound01 >= 0.5);
  CHECK(f.small_sample_warning);

  LadderEstimates missing = est;
  missing.mean_loss.pop_back();
  CHECK_THROWS(assemble_report(ladder, missing, {}));
}
