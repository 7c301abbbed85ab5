#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "gibbsbound/model.hpp"
#include "reference_mlp.hpp"

using namespace gibbs;

TEST_CASE("architecture layout") {
  const Architecture a{{3, 4, 1}};
  CHECK(a.param_count() == 3 * 4 + 4 + 4 + 1);
  CHECK(a.weight_offset(0) == 0);
  CHECK(a.bias_offset(0) == 12);
  CHECK(a.weight_offset(1) == 16);
  CHECK(a.bias_offset(1) == 20);
  CHECK(Architecture::parse("20,32,1").widths == std::vector<std::size_t>{20, 32, 1});
  CHECK(Architecture::parse("20, 32, 1").to_string() == "20,32,1");
  CHECK_THROWS(Architecture::parse("20,32,2"));
  CHECK_THROWS(Architecture::parse("20"));
  CHECK_THROWS(Architecture::parse("20,x,1"));
}

TEST_CASE("init_params") {
  const Architecture a{{316, 316, 1}};
  const auto h = init_params(a, 5.0, 0);
  CHECK(h.size() > 100000);
  const double mean = std::accumulate(h.begin(), h.end(), 0.0) / h.size();
  double var = 0.0;
  for (double v : h) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / h.size());
  CHECK(std::abs(mean) <= 0.05 * 5.0);
  CHECK(sd >= 0.99 * 5.0);
  CHECK(sd <= 1.01 * 5.0);
  CHECK(init_params(a, 5.0, 0) == h);
  CHECK_THROWS(init_params(a, 0.0, 0));
}

TEST_CASE("forward_scores examples") {
  const Architecture lin{{2, 1}};
  Matrix x(1, 2);
  x(0, 0) = 3.0;
  x(0, 1) = -1.0;
  CHECK(forward_scores(lin, std::vector<double>{1.0, 2.0, 0.5}, x)[0] == doctest::Approx(1.5));

  const Architecture a{{3, 4, 1}};
  Matrix xs(5, 3);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  for (double& v : xs.values) v = nd(rng);
  const std::vector<double> zero(a.param_count(), 0.0);
  for (double s : forward_scores(a, zero, xs)) CHECK(s == 0.0);

  // Zero inputs with zero biases give zero scores.
  auto p = init_params(a, 1.0, 3);
  for (std::size_t l = 0; l < a.layer_count(); ++l)
    for (std::size_t j = 0; j < a.widths[l + 1]; ++j) p[a.bias_offset(l) + j] = 0.0;
  Matrix zeros(2, 3);
  for (double s : forward_scores(a, p, zeros)) CHECK(s == 0.0);

  CHECK_THROWS(forward_scores(a, p, Matrix(1, 2)));
  CHECK_THROWS(forward_scores(a, std::vector<double>(3), xs));
}

TEST_CASE("forward pass matches the reference implementation") {
  const Architecture a{{6, 7, 5, 1}};
  const auto p = init_params(a, 1.0, 11);
  Matrix xs(20, 6);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  for (double& v : xs.values) v = nd(rng);
  const auto s = forward_scores(a, p, xs);
  for (std::size_t i = 0; i < xs.rows; ++i)
    CHECK(s[i] == doctest::Approx(testing_ref::ref_forward(a.widths, p, xs.row(i).data()).score)
                      .epsilon(1e-12));
}

TEST_CASE("surrogate loss examples") {
  LossConfig bbce;
  CHECK(bbce.p_min == doctest::Approx(std::exp(-4.0)).epsilon(1e-15));
  CHECK(surrogate_loss(0.0, 1, bbce) == doctest::Approx(std::log(2.0) / 4).epsilon(1e-14));
  CHECK(surrogate_loss(-1e6, 1, bbce) == 1.0);
  CHECK(surrogate_loss(1e6, 1, bbce) == doctest::Approx(0.0).epsilon(1e-12));

  LossConfig savage;
  savage.kind = LossKind::Savage;
  CHECK(surrogate_loss(0.0, 1, savage) == doctest::Approx(0.25));
  CHECK(surrogate_loss(50.0, 1, savage) < 1e-40);
  CHECK(surrogate_loss(-50.0, 1, savage) == doctest::Approx(1.0));
  CHECK(surrogate_loss(-3.0, -1, savage) == surrogate_loss(3.0, 1, savage));
}

TEST_CASE("surrogate losses stay in [0, 1]") {
  std::mt19937_64 rng(4);
  std::cauchy_distribution<double> wide(0.0, 5.0);
  LossConfig bbce, savage;
  savage.kind = LossKind::Savage;
  for (int i = 0; i < 1000000; ++i) {
    const double s = wide(rng);
    const int y = (i & 1) ? 1 : -1;
    const double a = surrogate_loss(s, y, bbce);
    const double b = surrogate_loss(s, y, savage);
    REQUIRE(a >= 0.0);
    REQUIRE(a <= 1.0);
    REQUIRE(b >= 0.0);
    REQUIRE(b <= 1.0);
  }
}

TEST_CASE("bounded cross-entropy is flat past the clip") {
  LossConfig bbce;
  CHECK(surrogate_loss_derivative(-10.0, 1, bbce) == 0.0);
  CHECK(surrogate_loss_derivative(-3.0, 1, bbce) != 0.0);
}

TEST_CASE("zero_one_error") {
  CHECK(zero_one_error(std::vector<double>{2.0, -1.0}, std::vector<int>{1, 1}, 0.0) == 0.5);
  CHECK(zero_one_error(std::vector<double>{0.0, 0.0}, std::vector<int>{1, -1}, 0.0) == 0.0);
  CHECK(zero_one_error(std::vector<double>{0.5}, std::vector<int>{1}, 1.0) == 1.0);
  CHECK_THROWS(zero_one_error(std::vector<double>{}, std::vector<int>{}, 0.0));
  CHECK_THROWS(zero_one_error(std::vector<double>{1.0}, std::vector<int>{1, 1}, 0.0));

  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  std::vector<double> s(10000);
  std::vector<int> y(10000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = nd(rng);
    y[i] = nd(rng) > 0 ? 1 : -1;
  }
  const double e = zero_one_error(s, y, 0.0);
  CHECK(e >= 0.47);
  CHECK(e <= 0.53);
}

TEST_CASE("analytic gradient matches finite differences") {
  std::mt19937_64 rng(21);
  for (LossKind kind : {LossKind::BoundedBCE, LossKind::Savage}) {
    LossConfig cfg;
    cfg.kind = kind;
    for (int trial = 0; trial < 20; ++trial) {
      const auto gc = testing_ref::make_gradient_case(rng, cfg);
      std::vector<std::size_t> batch(gc.ds.size());
      std::iota(batch.begin(), batch.end(), 0);
      const auto [loss, grad] = loss_and_gradient(Architecture{gc.widths}, gc.params, gc.ds, batch, cfg);
      CHECK(loss == doctest::Approx(testing_ref::ref_mean_loss(gc.widths, gc.params, gc.ds, cfg))
                        .epsilon(1e-12));
      const auto chk = testing_ref::compare_gradient(gc.widths, gc.params, gc.ds, cfg, grad);
      CHECK(chk.max_rel_error <= 1e-4);
    }
  }
}

TEST_CASE("duplicated batch leaves loss and gradient unchanged") {
  std::mt19937_64 rng(5);
  LossConfig cfg;
  const auto gc = testing_ref::make_gradient_case(rng, cfg);
  const Architecture a{gc.widths};
  std::vector<std::size_t> once(gc.ds.size()), twice;
  std::iota(once.begin(), once.end(), 0);
  for (auto i : once) {
    twice.push_back(i);
    twice.push_back(i);
  }
  const auto [l1, g1] = loss_and_gradient(a, gc.params, gc.ds, once, cfg);
  const auto [l2, g2] = loss_and_gradient(a, gc.params, gc.ds, twice, cfg);
  CHECK(l1 == doctest::Approx(l2).epsilon(1e-14));
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == doctest::Approx(g2[i]).epsilon(1e-12));
}

TEST_CASE("savage gradient vanishes under saturation") {
  LossConfig cfg;
  cfg.kind = LossKind::Savage;
  const Architecture a{{2, 1}};
  LabeledDataset ds;
  ds.features = Matrix(3, 2);
  ds.features.values = {1, 0, 0, 1, 1, 1};
  ds.labels = {1, 1, 1};
  const std::vector<double> p{100.0, 100.0, 100.0};
  const std::vector<std::size_t> batch{0, 1, 2};
  const auto [loss, grad] = loss_and_gradient(a, p, ds, batch, cfg);
  double norm = 0.0;
  for (double g : grad) norm += g * g;
  CHECK(std::sqrt(norm) <= 1e-8);
  CHECK(loss < 1e-8);
}

TEST_CASE("evaluate agrees with the gradient pass") {
  const Architecture a{{20, 8, 1}};
  SyntheticSpec spec;
  spec.n = 64;
  const auto ds = make_synthetic(spec, 3);
  const auto p = init_params(a, 0.5, 3);
  Mlp m(a);
  LossConfig cfg;
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<double> g(a.param_count());
  std::size_t errors = 0;
  const double loss = m.loss_and_gradient(p, ds, all, cfg, g, &errors);
  const auto ev = m.evaluate(p, ds, cfg);
  CHECK(ev.loss == loss);
  CHECK(ev.zero_one == static_cast<double>(errors) * (1.0 / ds.size()));
  CHECK(ev.zero_one == doctest::Approx(zero_one_error(m.forward_scores(p, ds.features), ds.labels, 0.0)));
}
