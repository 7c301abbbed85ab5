#include "gibbsbound/sampler.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "gibbsbound/kernels.hpp"

namespace gibbs {
namespace {

void fill_normal(std::span<double> out, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : out) v = normal(rng);
}

// Selection sampling (Knuth's Algorithm S): m of n indices without
// replacement, emitted in increasing order.
void sample_batch(std::size_t n, std::size_t m, Rng& rng, std::vector<std::size_t>& out) {
  out.clear();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::size_t needed = m;
  for (std::size_t i = 0; i < n && needed > 0; ++i) {
    const std::size_t left = n - i;
    if (needed == left || unif(rng) * static_cast<double>(left) < static_cast<double>(needed)) {
      out.push_back(i);
      --needed;
    }
  }
}

}  // namespace

std::string_view sampler_method_name(SamplerMethod method) {
  return method == SamplerMethod::SGLD ? "sgld" : "ula";
}

SamplerMethod parse_sampler_method(std::string_view text) {
  if (text == "ula") return SamplerMethod::ULA;
  if (text == "sgld") return SamplerMethod::SGLD;
  throw std::invalid_argument("unknown sampler method '" + std::string(text) + "'");
}

void SamplerConfig::validate(std::size_t n) const {
  if (!(step > 0.0)) throw std::invalid_argument("step size must be positive");
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw std::invalid_argument("inverse temperature must be finite and >= 0");
  if (!(prior_width > 0.0)) throw std::invalid_argument("prior width must be positive");
  if (record_every < 1) throw std::invalid_argument("record_every must be >= 1");
  if (init_width && !(*init_width > 0.0))
    throw std::invalid_argument("initial width must be positive");
  if (method == SamplerMethod::SGLD && (minibatch_size < 1 || minibatch_size > n))
    throw std::invalid_argument("minibatch size must lie in [1, n]");
}

std::size_t default_minibatch_size(std::size_t n) {
  const double raw = std::sqrt(1.25 * static_cast<double>(n));
  std::size_t m = static_cast<std::size_t>(std::ceil(raw / 10.0 - 1e-9)) * 10;
  return std::clamp<std::size_t>(m, 1, std::max<std::size_t>(n, 1));
}

FilterForm ErgodicConfig::resolved_form(SamplerMethod method) const {
  if (form) return *form;
  return method == SamplerMethod::ULA ? FilterForm::Symmetric : FilterForm::EMA;
}

Evaluation Objective::full_loss_and_gradient(std::span<const double> params,
                                             std::span<double> grad) {
  std::vector<std::size_t> all(sample_count());
  std::iota(all.begin(), all.end(), std::size_t{0});
  batch_loss_and_gradient(params, all, grad);
  return evaluate(params);
}

MlpObjective::MlpObjective(const Architecture& arch, const LabeledDataset& ds,
                           LossConfig cfg)
    : mlp_(arch), all_(ds.size()), ds_(&ds), cfg_(cfg) {
  std::iota(all_.begin(), all_.end(), std::size_t{0});
  cfg_.validate();
  if (ds.input_dim() != arch.input_dim())
    throw std::invalid_argument("dataset width does not match the architecture");
  if (ds.labels.size() != ds.size())
    throw std::invalid_argument("dataset has no binary labels");
}

double MlpObjective::batch_loss_and_gradient(std::span<const double> params,
                                             std::span<const std::size_t> batch,
                                             std::span<double> grad) {
  return mlp_.loss_and_gradient(params, *ds_, batch, cfg_, grad);
}

Evaluation MlpObjective::evaluate(std::span<const double> params) {
  return mlp_.evaluate(params, *ds_, cfg_);
}

Evaluation MlpObjective::full_loss_and_gradient(std::span<const double> params,
                                                std::span<double> grad) {
  std::size_t errors = 0;
  const double loss = mlp_.loss_and_gradient(params, *ds_, all_, cfg_, grad, &errors);
  return {loss, static_cast<double>(errors) * (1.0 / static_cast<double>(all_.size()))};
}

void lmc_step_inplace(std::span<double> h, std::span<const double> grad,
                      const SamplerConfig& cfg, std::span<const double> noise) {
  if (h.size() != noise.size() || h.size() != grad.size())
    throw std::invalid_argument("lmc_step: dimension mismatch");
  if (cfg.beta == 0.0) {
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = cfg.prior_width * noise[i];
  } else {
    const double shrink = cfg.step / (cfg.beta * cfg.prior_width * cfg.prior_width);
    const double noise_scale = std::sqrt(2.0 * cfg.step / cfg.beta);
    kernels::langevin_update(h, grad, noise, cfg.step, shrink, noise_scale);
  }
  if (!(kernels::max_abs(h) <= kDivergenceLimit))
    throw ChainDiverged(0, "Langevin update left the finite range");
}

ParamVector lmc_step(std::span<const double> h, std::span<const double> grad,
                     const SamplerConfig& cfg, std::span<const double> noise) {
  ParamVector out(h.begin(), h.end());
  lmc_step_inplace(out, grad, cfg, noise);
  return out;
}

ChainRecord run_chain(Objective& objective, const SamplerConfig& cfg,
                      const StopConfig& stop, const ErgodicConfig& erg,
                      const ChainOptions& options) {
  const std::size_t n = objective.sample_count();
  const std::size_t d = objective.dimension();
  cfg.validate(n);
  stop.validate();

  Rng init_rng(derive_seed(cfg.seed, kInitStream));
  Rng noise_rng(derive_seed(cfg.seed, kNoiseStream));
  Rng batch_rng(derive_seed(cfg.seed, kBatchStream));

  ParamVector h(d);
  if (options.initial_params) {
    if (options.initial_params->size() != d)
      throw std::invalid_argument("initial parameters have the wrong length");
    h = *options.initial_params;
  } else {
    std::normal_distribution<double> prior(0.0, cfg.init_width.value_or(cfg.prior_width));
    for (auto& v : h) v = prior(init_rng);
  }

  const FilterForm form = erg.resolved_form(cfg.method);
  ChainRecord rec;
  rec.stop_filter = RunningMean(form, erg.alpha_stop);
  rec.ergodic_filter = RunningMean(form, erg.alpha_erg);
  rec.ergodic_01_filter = RunningMean(form, erg.alpha_erg);
  RunningMean heldout_filter(form, erg.alpha_erg);

  ParamVector grad(d, 0.0);
  ParamVector noise(d, 0.0);
  std::vector<std::size_t> batch;
  batch.reserve(n);

  const bool exact_prior = cfg.beta == 0.0;
  const bool full_gradient = cfg.method == SamplerMethod::ULA;

  auto record = [&](std::size_t t, const Evaluation& ev) -> bool {
    if (!std::isfinite(ev.loss) || std::fabs(ev.loss) > kDivergenceLimit)
      throw ChainDiverged(t, "loss diverged at step " + std::to_string(t));
    rec.steps.push_back(t);
    rec.loss.push_back(ev.loss);
    rec.zero_one.push_back(ev.zero_one);
    if (options.heldout) {
      const double e = options.heldout->evaluate(h).zero_one;
      rec.heldout_zero_one.push_back(e);
      if (t > 0) heldout_filter.update(e);
    }
    if (t == 0) return false;
    const double before = rec.stop_filter.value;
    rec.stop_filter.update(ev.loss);
    rec.ergodic_filter.update(ev.loss);
    rec.ergodic_01_filter.update(ev.zero_one);
    return should_stop(before, rec.stop_filter.value, t, stop);
  };

  std::size_t t = 0;
  bool stopped = false;
  for (;; ++t) {
    const bool due = t % cfg.record_every == 0 || t == cfg.max_steps;
    Evaluation ev;
    // ULA's full-batch gradient pass already yields the full-data loss.
    if (!exact_prior && full_gradient)
      ev = objective.full_loss_and_gradient(h, grad);
    else if (due)
      ev = objective.evaluate(h);
    if (due) {
      if (record(t, ev)) {
        stopped = true;
        break;
      }
    }
    if (t == cfg.max_steps) break;

    if (!exact_prior && !full_gradient) {
      sample_batch(n, cfg.minibatch_size, batch_rng, batch);
      objective.batch_loss_and_gradient(h, batch, grad);
    }
    fill_normal(noise, noise_rng);
    try {
      lmc_step_inplace(h, grad, cfg, noise);
    } catch (const ChainDiverged&) {
      throw ChainDiverged(t + 1, "chain diverged at step " + std::to_string(t + 1));
    }
  }

  rec.stop_step = t;
  rec.stopped_by_rule = stopped;
  rec.final_params = std::move(h);
  rec.ergodic_mean_loss = rec.ergodic_filter.value;
  rec.ergodic_mean_01 = rec.ergodic_01_filter.value;
  if (options.heldout) rec.ergodic_mean_heldout_01 = heldout_filter.value;
  return rec;
}

ChainRecord run_chain(const LabeledDataset& ds, const Architecture& arch,
                      const LossConfig& loss_cfg, const SamplerConfig& cfg,
                      const StopConfig& stop, const ErgodicConfig& erg) {
  MlpObjective objective(arch, ds, loss_cfg);
  return run_chain(objective, cfg, stop, erg);
}

}  // namespace gibbs
