#pragma once

// Generalization bounds assembled from per-rung posterior estimates along a
// ladder of inverse temperatures.

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gibbs {

/// 0 = beta_0 < beta_1 < ... < beta_K.
class TemperatureLadder {
 public:
  /// Throws std::invalid_argument unless the first entry is 0 and the
  /// sequence is strictly increasing and finite.
  explicit TemperatureLadder(std::vector<double> betas);

  static TemperatureLadder parse(std::string_view text);
  static TemperatureLadder standard();  // 0, 500, 1000, ..., 64000
  /// K + 1 evenly spaced temperatures on [0, beta_max].
  static TemperatureLadder uniform(double beta_max, std::size_t rungs);

  const std::vector<double>& betas() const { return betas_; }
  double operator[](std::size_t k) const { return betas_[k]; }
  std::size_t size() const { return betas_.size(); }
  std::size_t top() const { return betas_.size() - 1; }  // K
  double max_beta() const { return betas_.back(); }
  /// beta_0 .. beta_k
  TemperatureLadder prefix(std::size_t k) const;
  std::string to_string() const;

 private:
  std::vector<double> betas_;
};

/// Per-rung estimates of E[emp loss] and E[emp 0-1 rate] under the
/// approximate posteriors.
struct LadderEstimates {
  std::vector<double> mean_loss;
  std::vector<double> mean_01;
  std::size_t n = 0;

  std::size_t size() const { return mean_loss.size(); }
  /// Throws std::invalid_argument unless the estimates cover every rung
  /// and lie in [0, 1].
  void validate(const TemperatureLadder& ladder) const;
};

/// -beta_k L_h + sum_{j=1..k} (beta_j - beta_{j-1}) E_{j-1}.
double gamma_nu(const TemperatureLadder& ladder, const LadderEstimates& est,
                std::size_t target_k, double loss_h);

/// gamma_nu with loss_h = E_k: the posterior-mean form.
double gamma_nu_posterior_mean(const TemperatureLadder& ladder,
                               const LadderEstimates& est, std::size_t target_k);

/// True when n satisfies the sample-size hypothesis (n >= 8) of the kl
/// budget.
inline bool kl_budget_sample_size_ok(std::size_t n) { return n >= 8; }

/// (gamma + ln(2 sqrt(n) / delta)) / n, clamped below at 0.
double kl_budget(double gamma, std::size_t n, double delta);

/// kl^-1(emp01, budget): upper bound on the expected 0-1 error.
double bound_01(double emp01, double budget);

/// sigma_sg sqrt(2 [gamma (1 + 1/n) + ln(gamma (n + 1) / delta)] / n), or
/// nullopt when gamma < 1 (the bound does not apply).
std::optional<double> subgaussian_bound(double gamma, double sigma_sg, std::size_t n,
                                        double delta);

enum class PenaltyMode { TVSingleDraw, TVPosteriorMean, W2PosteriorMean };

std::string_view penalty_mode_name(PenaltyMode mode);
PenaltyMode parse_penalty_mode(std::string_view text);

struct StabilityInputs {
  /// Bound (or Lipschitz seminorm in W2 mode) of the surrogate loss.
  double loss_bound = 1.0;
  /// Bound (or Lipschitz seminorm) of the proxy function.
  double proxy_bound = 1.0;
  /// Approximation error of each rung's sampler (TV or W2).
  std::vector<double> epsilon;
  PenaltyMode mode = PenaltyMode::TVPosteriorMean;
};

/// Additional slack from sampling the rungs approximately, at target rung k.
double stability_penalty(const StabilityInputs& inp, const TemperatureLadder& ladder,
                         std::size_t target_k);

struct TheoryParams {
  double lsi_constant = 1.0;    // alpha
  double hessian_bound = 1.0;   // R
  double step = 1e-3;           // eta
  double steps = 0.0;           // t
  double dimension = 1.0;       // d
  double beta = 1.0;
  double prior_width = 1.0;     // sigma
  double initial_kl = 1.0;      // D(beta) = KL(G_beta, nu_0)
};

struct UlaDivergence {
  double kl = 0.0;
  double w2 = 0.0;
  double tv = 0.0;
  /// eta <= alpha / (4 (beta R + 1/sigma^2)^2)
  bool step_admissible = false;
};

/// Distance between G_beta and the law of the t-th Langevin iterate under a
/// log-Sobolev assumption. Throws std::invalid_argument for nonpositive
/// parameters (t may be 0).
UlaDivergence ula_divergence(const TheoryParams& tp);

/// max(0, beta (E_beta - E_2beta)), an upper bound on KL(G_beta, G_2beta).
double kl_doubling_diagnostic(double e_beta, double e_2beta, double beta);

struct SingleDraw {
  double loss = 0.0;
  double zero_one = 0.0;
};

struct BoundRow {
  double beta = 0.0;
  double train_loss = 0.0;
  double train01 = 0.0;
  double gamma = 0.0;
  double budget = 0.0;
  double bound01 = 0.0;
  std::optional<double> bound01_single;
  double penalty = 0.0;
};

struct BoundReport {
  double delta = 0.01;
  double r = 1.0;
  std::size_t n = 0;
  std::vector<double> ladder;
  std::vector<BoundRow> rows;
  bool small_sample_warning = false;
};

struct ReportOptions {
  double delta = 0.01;
  /// Multiplier applied to gamma before the budget (calibration factor).
  double r = 1.0;
  /// Per-rung additive penalty, added to r * gamma.
  std::optional<std::vector<double>> penalties;
  /// Final-iterate loss and 0-1 rate per rung, for the single-draw variant.
  std::optional<std::vector<SingleDraw>> single_draws;
  /// Loss plugged into the -beta L_h term of the posterior-mean bound.
  /// Defaults to the rung's own estimate E_k; supplying per-rung values
  /// (e.g. a drawn hypothesis' loss) selects the alternative reading.
  std::optional<std::vector<double>> endpoint_losses;
};

/// One row per rung (rung 0 included, where gamma is 0). Throws
/// std::invalid_argument for estimates that do not cover the ladder.
BoundReport assemble_report(const TemperatureLadder& ladder, const LadderEstimates& est,
                            const ReportOptions& options);

}  // namespace gibbs
