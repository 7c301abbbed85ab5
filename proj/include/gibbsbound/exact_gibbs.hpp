#pragma once

// Exact Gibbs posteriors on finite hypothesis spaces. This is the
// brute-force reference that the ladder estimators are checked against.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gibbsbound/rng.hpp"

namespace gibbs {

class TemperatureLadder;

struct FiniteHypothesisSpace {
  std::vector<double> prior;
  std::vector<double> emp_losses;
  /// Expected (population) loss per hypothesis, when known.
  std::vector<double> true_losses;
  /// Empirical 0-1 rate per hypothesis, when known.
  std::vector<double> emp_01;

  std::size_t size() const { return prior.size(); }
  /// Throws std::invalid_argument when the prior is not a normalized
  /// positive vector (to 1e-12) or a loss leaves [0, 1].
  void validate() const;
};

/// Plain text table, one hypothesis per row:
///   prior emp_loss [true_loss [emp_01]]
/// Blank lines and lines starting with '#' are skipped.
FiniteHypothesisSpace load_space(const std::filesystem::path& path);
FiniteHypothesisSpace parse_space(const std::string& text);
std::string format_space(const FiniteHypothesisSpace& space);

double log_partition_function(const FiniteHypothesisSpace& space, double beta);
/// Z_beta = sum_i prior_i exp(-beta L_i), in (0, 1].
double partition_function(const FiniteHypothesisSpace& space, double beta);

/// Normalized Gibbs weights prior_i exp(-beta L_i) / Z_beta.
std::vector<double> gibbs_weights(const FiniteHypothesisSpace& space, double beta);

/// E_{G_beta}[emp_loss]
double posterior_mean_loss(const FiniteHypothesisSpace& space, double beta);

/// E_{G_beta}[v] for an arbitrary per-hypothesis quantity v.
double posterior_expectation(const FiniteHypothesisSpace& space, double beta,
                             std::span<const double> values);

/// -Var_{G_beta}(emp_loss), the beta-derivative of posterior_mean_loss.
double heat_capacity(const FiniteHypothesisSpace& space, double beta);

struct FreeEnergyCheck {
  double lhs = 0.0;  // -ln Z_beta
  double rhs = 0.0;  // composite Simpson of int_0^beta E_{G_gamma}[L] dgamma
};

/// quad_steps is the panel count; odd counts are rounded up to even.
FreeEnergyCheck free_energy_identity_check(const FiniteHypothesisSpace& space,
                                           double beta, std::size_t quad_steps = 4096);

/// -beta_K L_h + sum_k (beta_k - beta_{k-1}) E_{G_{beta_{k-1}}}[L], for
/// hypothesis h_index.
double exact_gamma(const FiniteHypothesisSpace& space, const TemperatureLadder& ladder,
                   std::size_t h_index);

/// KL(G_a || G_b) between two Gibbs posteriors on the same space.
double gibbs_kl(const FiniteHypothesisSpace& space, double beta_a, double beta_b);

/// Inverse-CDF draw of a hypothesis index from G_beta.
std::size_t sample_gibbs(const FiniteHypothesisSpace& space, double beta, Rng& rng);

}  // namespace gibbs
