#include "gibbsbound/bounds.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "gibbsbound/kl.hpp"

namespace gibbs {

TemperatureLadder::TemperatureLadder(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw std::invalid_argument("temperature ladder is empty");
  if (betas_.front() != 0.0)
    throw std::invalid_argument("temperature ladder must start at beta = 0");
  for (std::size_t k = 0; k < betas_.size(); ++k) {
    if (!std::isfinite(betas_[k]))
      throw std::invalid_argument("temperature ladder entries must be finite");
    if (k > 0 && !(betas_[k] > betas_[k - 1]))
      throw std::invalid_argument("temperature ladder must be strictly increasing");
  }
}

TemperatureLadder TemperatureLadder::parse(std::string_view text) {
  std::vector<double> b;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    std::string token(text.substr(pos, comma == text.npos ? text.npos : comma - pos));
    std::istringstream in(token);
    double v = 0.0;
    std::string rest;
    if (!(in >> v) || (in >> rest))
      throw std::invalid_argument("bad ladder entry '" + token + "'");
    b.push_back(v);
    if (comma == text.npos) break;
    pos = comma + 1;
  }
  return TemperatureLadder(std::move(b));
}

TemperatureLadder TemperatureLadder::standard() {
  return TemperatureLadder({0, 500, 1000, 2000, 4000, 8000, 16000, 32000, 64000});
}

TemperatureLadder TemperatureLadder::uniform(double beta_max, std::size_t rungs) {
  if (rungs < 1) throw std::invalid_argument("uniform ladder needs at least one rung");
  std::vector<double> b(rungs + 1);
  for (std::size_t k = 0; k <= rungs; ++k)
    b[k] = beta_max * static_cast<double>(k) / static_cast<double>(rungs);
  return TemperatureLadder(std::move(b));
}

TemperatureLadder TemperatureLadder::prefix(std::size_t k) const {
  if (k >= betas_.size()) throw std::out_of_range("ladder prefix beyond the top rung");
  return TemperatureLadder(std::vector<double>(betas_.begin(), betas_.begin() + k + 1));
}

std::string TemperatureLadder::to_string() const {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t k = 0; k < betas_.size(); ++k) os << (k ? "," : "") << betas_[k];
  return os.str();
}

void LadderEstimates::validate(const TemperatureLadder& ladder) const {
  if (mean_loss.size() != ladder.size() || mean_01.size() != ladder.size())
    throw std::invalid_argument("ladder estimates are missing rungs");
  auto ok = [](double v) { return v >= 0.0 && v <= 1.0; };
  for (std::size_t k = 0; k < ladder.size(); ++k)
    if (!ok(mean_loss[k]) || !ok(mean_01[k]))
      throw std::invalid_argument("ladder estimate at rung " + std::to_string(k) +
                                  " is missing or outside [0, 1]");
}

double gamma_nu(const TemperatureLadder& ladder, const LadderEstimates& est,
                std::size_t target_k, double loss_h) {
  if (target_k > ladder.top())
    throw std::invalid_argument("target rung beyond the top of the ladder");
  if (est.mean_loss.size() < target_k + 1)
    throw std::invalid_argument("estimates do not reach the target rung");
  double gamma = -ladder[target_k] * loss_h;
  for (std::size_t j = 1; j <= target_k; ++j)
    gamma += (ladder[j] - ladder[j - 1]) * est.mean_loss[j - 1];
  return gamma;
}

double gamma_nu_posterior_mean(const TemperatureLadder& ladder,
                               const LadderEstimates& est, std::size_t target_k) {
  if (est.mean_loss.size() < target_k + 1)
    throw std::invalid_argument("estimates do not reach the target rung");
  return gamma_nu(ladder, est, target_k, est.mean_loss[target_k]);
}

double kl_budget(double gamma, std::size_t n, double delta) {
  if (n == 0) throw std::invalid_argument("kl budget needs n >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  const double nd = static_cast<double>(n);
  const double value = (gamma + std::log(2.0 * std::sqrt(nd) / delta)) / nd;
  return std::max(value, 0.0);
}

double bound_01(double emp01, double budget) { return binary_kl_inverse(emp01, budget); }

std::optional<double> subgaussian_bound(double gamma, double sigma_sg, std::size_t n,
                                        double delta) {
  if (!(gamma >= 1.0)) return std::nullopt;
  if (n == 0) throw std::invalid_argument("subgaussian bound needs n >= 1");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  const double nd = static_cast<double>(n);
  const double inner = gamma * (1.0 + 1.0 / nd) + std::log(gamma * (nd + 1.0) / delta);
  return sigma_sg * std::sqrt(2.0 * inner / nd);
}

std::string_view penalty_mode_name(PenaltyMode mode) {
  switch (mode) {
    case PenaltyMode::TVSingleDraw: return "tv_single_draw";
    case PenaltyMode::TVPosteriorMean: return "tv_posterior_mean";
    case PenaltyMode::W2PosteriorMean: return "w2_posterior_mean";
  }
  return "";
}

PenaltyMode parse_penalty_mode(std::string_view text) {
  if (text == "tv_single_draw") return PenaltyMode::TVSingleDraw;
  if (text == "tv_posterior_mean") return PenaltyMode::TVPosteriorMean;
  if (text == "w2_posterior_mean") return PenaltyMode::W2PosteriorMean;
  throw std::invalid_argument("unknown penalty mode '" + std::string(text) + "'");
}

double stability_penalty(const StabilityInputs& inp, const TemperatureLadder& ladder,
                         std::size_t target_k) {
  if (target_k > ladder.top())
    throw std::invalid_argument("target rung beyond the top of the ladder");
  if (inp.epsilon.size() < target_k + 1)
    throw std::invalid_argument("stability inputs need an epsilon for every rung");
  if (inp.loss_bound < 0.0 || inp.proxy_bound < 0.0)
    throw std::invalid_argument("stability bounds must be nonnegative");
  for (double e : inp.epsilon)
    if (!(e >= 0.0)) throw std::invalid_argument("approximation errors must be >= 0");

  const double beta = ladder[target_k];
  const double m = inp.loss_bound;
  double ladder_term = 0.0;
  for (std::size_t k = 1; k <= target_k; ++k)
    ladder_term += (ladder[k] - ladder[k - 1]) * m * inp.epsilon[k - 1];

  const double eps_top = inp.epsilon[target_k];
  double head = 0.0;
  if (inp.mode == PenaltyMode::TVSingleDraw) {
    // ln(2 e^{M + beta m} eps) is -inf for an exact sampler.
    if (eps_top == 0.0) return 0.0;
    head = inp.proxy_bound + beta * m + std::log(2.0 * eps_top);
  } else {
    head = (inp.proxy_bound + beta * m) * eps_top;
  }
  return std::max(head + ladder_term, 0.0);
}

UlaDivergence ula_divergence(const TheoryParams& tp) {
  if (!(tp.lsi_constant > 0.0) || !(tp.hessian_bound > 0.0) || !(tp.step > 0.0) ||
      !(tp.dimension > 0.0) || !(tp.beta > 0.0) || !(tp.prior_width > 0.0) ||
      !(tp.initial_kl > 0.0) || !(tp.steps >= 0.0))
    throw std::invalid_argument("ula_divergence: parameters must be positive");
  const double a = tp.lsi_constant;
  const double lip = tp.beta * tp.hessian_bound + 1.0 / (tp.prior_width * tp.prior_width);
  const double decay = std::exp(-a * tp.step * tp.steps / tp.beta);
  const double decay_half = std::exp(-a * tp.step * tp.steps / (2.0 * tp.beta));
  const double ed = tp.step * tp.dimension;

  UlaDivergence out;
  out.kl = decay * tp.initial_kl + 8.0 * ed * lip * lip / (tp.beta * a);
  out.w2 = (2.0 / a) * decay * tp.initial_kl + 16.0 * ed * lip * lip / (tp.beta * a * a);
  out.tv = decay_half * std::sqrt(tp.initial_kl) + 2.0 * std::sqrt(ed / (tp.beta * a)) * lip;
  out.step_admissible = tp.step <= a / (4.0 * lip * lip);
  return out;
}

double kl_doubling_diagnostic(double e_beta, double e_2beta, double beta) {
  return std::max(0.0, beta * (e_beta - e_2beta));
}

BoundReport assemble_report(const TemperatureLadder& ladder, const LadderEstimates& est,
                            const ReportOptions& options) {
  est.validate(ladder);
  if (options.penalties && options.penalties->size() != ladder.size())
    throw std::invalid_argument("penalties must cover every rung");
  if (options.single_draws && options.single_draws->size() != ladder.size())
    throw std::invalid_argument("single draws must cover every rung");
  if (options.endpoint_losses && options.endpoint_losses->size() != ladder.size())
    throw std::invalid_argument("endpoint losses must cover every rung");

  BoundReport report;
  report.delta = options.delta;
  report.r = options.r;
  report.n = est.n;
  report.ladder = ladder.betas();
  report.small_sample_warning = !kl_budget_sample_size_ok(est.n);

  for (std::size_t k = 0; k < ladder.size(); ++k) {
    BoundRow row;
    row.beta = ladder[k];
    row.train_loss = est.mean_loss[k];
    row.train01 = est.mean_01[k];
    row.gamma = options.endpoint_losses
                    ? gamma_nu(ladder, est, k, (*options.endpoint_losses)[k])
                    : gamma_nu_posterior_mean(ladder, est, k);
    row.penalty = options.penalties ? (*options.penalties)[k] : 0.0;
    row.budget = kl_budget(options.r * row.gamma + row.penalty, est.n, options.delta);
    row.bound01 = bound_01(row.train01, row.budget);
    if (options.single_draws) {
      const auto& draw = (*options.single_draws)[k];
      const double g = gamma_nu(ladder, est, k, draw.loss);
      const double b = kl_budget(options.r * g + row.penalty, est.n, options.delta);
      row.bound01_single = bound_01(draw.zero_one, b);
    }
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace gibbs
