#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "gibbsbound/data.hpp"
#include "gibbsbound/model.hpp"
#include "gibbsbound/sampler.hpp"

using namespace gibbs;

namespace {

// Constant surrogate: zero gradient everywhere.
class FlatObjective final : public Objective {
 public:
  FlatObjective(std::size_t d, std::size_t n) : d_(d), n_(n) {}
  std::size_t dimension() const override { return d_; }
  std::size_t sample_count() const override { return n_; }
  double batch_loss_and_gradient(std::span<const double>, std::span<const std::size_t>,
                                 std::span<double> grad) override {
    std::fill(grad.begin(), grad.end(), 0.0);
    return 0.3;
  }
  Evaluation evaluate(std::span<const double>) override { return {0.3, 0.5}; }

 private:
  std::size_t d_, n_;
};

// L = s * ||h||^2 / 2 keeps growing, for divergence checks.
class QuadraticObjective final : public Objective {
 public:
  explicit QuadraticObjective(double s) : s_(s) {}
  std::size_t dimension() const override { return 4; }
  std::size_t sample_count() const override { return 10; }
  double batch_loss_and_gradient(std::span<const double> h, std::span<const std::size_t>,
                                 std::span<double> grad) override {
    double l = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      grad[i] = s_ * h[i];
      l += 0.5 * s_ * h[i] * h[i];
    }
    return l;
  }
  Evaluation evaluate(std::span<const double> h) override {
    double l = 0.0;
    for (double v : h) l += 0.5 * s_ * v * v;
    return {l, 0.0};
  }

 private:
  double s_;
};

SamplerConfig base_cfg() {
  SamplerConfig c;
  c.method = SamplerMethod::ULA;
  c.step = 0.01;
  c.beta = 10.0;
  c.prior_width = 1.0;
  c.max_steps = 200;
  c.seed = 42;
  return c;
}

LabeledDataset small_data(std::size_t n, std::uint64_t seed) {
  SyntheticSpec s;
  s.n = n;
  s.input_dim = 5;
  return make_synthetic(s, seed);
}

bool same_record(const ChainRecord& a, const ChainRecord& b) {
  return a.steps == b.steps && a.loss == b.loss && a.zero_one == b.zero_one &&
         a.final_params == b.final_params && a.stop_step == b.stop_step &&
         a.ergodic_mean_loss == b.ergodic_mean_loss && a.ergodic_mean_01 == b.ergodic_mean_01;
}

}  // namespace

TEST_CASE("lmc_step examples") {
  auto cfg = base_cfg();
  const std::vector<double> zero(3, 0.0);
  CHECK(lmc_step(zero, zero, cfg, zero) == zero);

  const std::vector<double> h{1.0, -2.0, 0.5}, g{0.1, 0.2, -0.3}, xi{0.3, -1.0, 2.0};
  const auto out = lmc_step(h, g, cfg, xi);
  for (std::size_t i = 0; i < 3; ++i) {
    const double expect = h[i] - 0.01 * g[i] - 0.01 * h[i] / 10.0 + std::sqrt(0.002) * xi[i];
    CHECK(out[i] == doctest::Approx(expect).epsilon(1e-15));
  }

  cfg.beta = 0.0;
  cfg.prior_width = 3.0;
  const auto prior = lmc_step(h, g, cfg, xi);
  for (std::size_t i = 0; i < 3; ++i) CHECK(prior[i] == 3.0 * xi[i]);

  cfg = base_cfg();
  const std::vector<double> huge{1e13, 0.0, 0.0};
  CHECK_THROWS_AS(lmc_step(huge, zero, cfg, zero), ChainDiverged);
  const std::vector<double> bad{std::nan(""), 0.0, 0.0};
  CHECK_THROWS_AS(lmc_step(zero, bad, cfg, zero), ChainDiverged);
}

TEST_CASE("Gaussian target: stationary variance of the AR(1) chain") {
  const std::size_t d = 100;
  SamplerConfig cfg = base_cfg();
  cfg.beta = 1.0;
  cfg.prior_width = 1.0;
  const double c = cfg.step / (cfg.beta * cfg.prior_width * cfg.prior_width);
  const double target = 2.0 * cfg.prior_width * cfg.prior_width / (2.0 - c);

  Rng rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> h(d), xi(d), zero(d, 0.0);
  for (auto& v : h) v = normal(rng);
  const int burn = 2000, steps = 100000;
  double sum_sq = 0.0;
  for (int t = 0; t < burn + steps; ++t) {
    for (auto& v : xi) v = normal(rng);
    lmc_step_inplace(h, zero, cfg, xi);
    if (t >= burn)
      for (double v : h) sum_sq += v * v;
  }
  const double var = sum_sq / (static_cast<double>(d) * steps);
  CHECK(std::abs(var / target - 1.0) <= 0.02);
}

TEST_CASE("zero-gradient chain is the AR(1) prior chain") {
  FlatObjective obj(7, 20);
  auto cfg = base_cfg();
  cfg.max_steps = 50;
  const auto rec = run_chain(obj, cfg, StopConfig{}, ErgodicConfig{});

  Rng init(derive_seed(cfg.seed, kInitStream)), noise(derive_seed(cfg.seed, kNoiseStream));
  std::vector<double> h(7), xi(7), zero(7, 0.0);
  {
    std::normal_distribution<double> prior(0.0, cfg.prior_width);
    for (auto& v : h) v = prior(init);
  }
  for (std::size_t t = 0; t < cfg.max_steps; ++t) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : xi) v = normal(noise);
    lmc_step_inplace(h, zero, cfg, xi);
  }
  CHECK(rec.final_params == h);
  CHECK(rec.stop_step == 50);
  CHECK_FALSE(rec.stopped_by_rule);
  CHECK(rec.steps.size() == 51);
}

TEST_CASE("beta = 0 chain matches direct prior sampling") {
  const auto ds = small_data(200, 3);
  const Architecture arch{{5, 8, 1}};
  LossConfig lc;
  auto cfg = base_cfg();
  cfg.beta = 0.0;
  cfg.prior_width = 1.0;
  cfg.max_steps = 20000;
  ErgodicConfig erg;
  erg.form = FilterForm::EMA;
  const auto rec = run_chain(ds, arch, lc, cfg, StopConfig{1e-7, 30000}, erg);

  // Independent estimate of E_prior[L] and its spread.
  MlpObjective obj(arch, ds, lc);

  const int draws = 4000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < draws; ++i) {
    const auto p = init_params(arch, 1.0, derive_seed(99, i));
    const double l = obj.evaluate(p).loss;
    s += l;
    s2 += l * l;
  }
  const double mean = s / draws;
  const double sd = std::sqrt(s2 / draws - mean * mean);
  // The EMA of iid draws has variance sd^2 a / (2 - a).
  const double se = sd * std::sqrt(0.01 / 1.99) + sd / std::sqrt(double(draws));
  CHECK(std::abs(rec.ergodic_mean_loss - mean) <= 3.0 * se);
}

TEST_CASE("run_chain determinism and recording") {
  const auto ds = small_data(60, 4);
  const Architecture arch{{5, 6, 1}};
  LossConfig lc;
  auto cfg = base_cfg();
  cfg.max_steps = 300;
  cfg.record_every = 7;
  const auto a = run_chain(ds, arch, lc, cfg, StopConfig{}, ErgodicConfig{});
  const auto b = run_chain(ds, arch, lc, cfg, StopConfig{}, ErgodicConfig{});
  CHECK(same_record(a, b));
  CHECK(a.steps.front() == 0);
  CHECK(a.steps.back() == 300);
  CHECK(a.steps[1] == 7);
  cfg.seed = 43;
  const auto c = run_chain(ds, arch, lc, cfg, StopConfig{}, ErgodicConfig{});
  CHECK(c.final_params != a.final_params);
}

TEST_CASE("SGLD with a full minibatch reproduces ULA") {
  const auto ds = small_data(40, 5);
  const Architecture arch{{5, 6, 1}};
  LossConfig lc;
  auto cfg = base_cfg();
  cfg.max_steps = 500;
  ErgodicConfig erg;
  erg.form = FilterForm::EMA;
  const auto ula = run_chain(ds, arch, lc, cfg, StopConfig{}, erg);
  cfg.method = SamplerMethod::SGLD;
  cfg.minibatch_size = 40;
  const auto sgld = run_chain(ds, arch, lc, cfg, StopConfig{}, erg);
  CHECK(ula.final_params == sgld.final_params);
  CHECK(ula.loss == sgld.loss);
}

TEST_CASE("ULA ergodic mean is invariant to permuting the examples") {
  const auto ds = small_data(50, 6);
  auto perm = ds;
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  perm.features = Matrix(ds.size(), ds.input_dim());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.input_dim(); ++j) perm.features(i, j) = ds.features(order[i], j);
    perm.labels[i] = ds.labels[order[i]];
  }
  const Architecture arch{{5, 4, 1}};
  LossConfig lc;
  auto cfg = base_cfg();
  cfg.max_steps = 300;
  const auto a = run_chain(ds, arch, lc, cfg, StopConfig{}, ErgodicConfig{});
  const auto b = run_chain(perm, arch, lc, cfg, StopConfig{}, ErgodicConfig{});
  // Sums over reordered examples round differently; the drift stays tiny.
  CHECK(a.ergodic_mean_loss == doctest::Approx(b.ergodic_mean_loss).epsilon(1e-9));
}

TEST_CASE("default minibatch size") {
  CHECK(default_minibatch_size(2000) == 50);
  CHECK(default_minibatch_size(8000) == 100);
  CHECK(default_minibatch_size(500) == 30);
  CHECK(default_minibatch_size(5) == 5);
  CHECK(default_minibatch_size(1) == 1);
}

TEST_CASE("divergence and config validation") {
  QuadraticObjective obj(1e6);
  auto cfg = base_cfg();
  cfg.step = 1.0;
  cfg.max_steps = 1000;
  CHECK_THROWS_AS(run_chain(obj, cfg, StopConfig{}, ErgodicConfig{}), ChainDiverged);

  auto bad = base_cfg();
  bad.step = 0.0;
  CHECK_THROWS(bad.validate(10));
  bad = base_cfg();
  bad.method = SamplerMethod::SGLD;
  bad.minibatch_size = 11;
  CHECK_THROWS(bad.validate(10));
  bad = base_cfg();
  bad.init_width = 0.0;
  CHECK_THROWS(bad.validate(10));
  CHECK(parse_sampler_method("sgld") == SamplerMethod::SGLD);
  CHECK_THROWS(parse_sampler_method("hmc"));
  ErgodicConfig erg;
  CHECK(erg.resolved_form(SamplerMethod::ULA) == FilterForm::Symmetric);
  CHECK(erg.resolved_form(SamplerMethod::SGLD) == FilterForm::EMA);
}
