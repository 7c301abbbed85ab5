#pragma once

// Unadjusted Langevin (ULA) and stochastic-gradient Langevin (SGLD) chains
// targeting the Gibbs posterior exp(-beta L(h)) N(h; 0, sigma^2 I).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "gibbsbound/data.hpp"
#include "gibbsbound/ergodic.hpp"
#include "gibbsbound/model.hpp"
#include "gibbsbound/rng.hpp"

namespace gibbs {

enum class SamplerMethod { ULA, SGLD };

std::string_view sampler_method_name(SamplerMethod method);
SamplerMethod parse_sampler_method(std::string_view text);

/// Generator streams of one chain, each seeded derive_seed(cfg.seed, stream).
/// Step noise is drawn coordinate by coordinate from a fresh standard
/// normal distribution every step.
inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kNoiseStream = 2;
inline constexpr std::uint64_t kBatchStream = 3;

/// Parameters or loss beyond this magnitude abort the chain.
inline constexpr double kDivergenceLimit = 1e12;

class ChainDiverged : public std::runtime_error {
 public:
  ChainDiverged(std::size_t step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

struct SamplerConfig {
  SamplerMethod method = SamplerMethod::ULA;
  double step = 0.01;        // eta
  double beta = 0.0;
  double prior_width = 5.0;  // sigma
  std::size_t minibatch_size = 1;
  std::size_t max_steps = 100000;
  /// Full-data loss is recorded (and the filters updated) every
  /// `record_every` steps.
  std::size_t record_every = 1;
  /// Width of the Gaussian the chain starts from; unset starts from the
  /// prior (width sigma).
  std::optional<double> init_width;
  std::uint64_t seed = 0;

  void validate(std::size_t n) const;
};

/// Minibatch size proportional to sqrt(n): sqrt(5n/4) rounded up to a
/// multiple of 10 (50 at n = 2000, 100 at n = 8000), clamped to [1, n].
std::size_t default_minibatch_size(std::size_t n);

struct ErgodicConfig {
  /// Defaults to Symmetric for ULA and EMA for SGLD.
  std::optional<FilterForm> form;
  double alpha_stop = kDefaultStopAlpha;
  double alpha_erg = kDefaultErgodicAlpha;

  FilterForm resolved_form(SamplerMethod method) const;
};

/// Loss landscape seen by a chain. Implementations may keep scratch state:
/// one instance per chain.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::size_t sample_count() const = 0;
  /// Mean surrogate loss over `batch`; writes its gradient into grad.
  virtual double batch_loss_and_gradient(std::span<const double> params,
                                         std::span<const std::size_t> batch,
                                         std::span<double> grad) = 0;
  /// Full-data mean surrogate loss and 0-1 error.
  virtual Evaluation evaluate(std::span<const double> params) = 0;
  /// evaluate() and the full-batch gradient in one pass.
  virtual Evaluation full_loss_and_gradient(std::span<const double> params,
                                            std::span<double> grad);
};

/// Objective of a network on a labeled dataset. Borrows the dataset.
class MlpObjective final : public Objective {
 public:
  MlpObjective(const Architecture& arch, const LabeledDataset& ds, LossConfig cfg);

  std::size_t dimension() const override { return mlp_.param_count(); }
  std::size_t sample_count() const override { return ds_->size(); }
  double batch_loss_and_gradient(std::span<const double> params,
                                 std::span<const std::size_t> batch,
                                 std::span<double> grad) override;
  Evaluation evaluate(std::span<const double> params) override;
  Evaluation full_loss_and_gradient(std::span<const double> params,
                                    std::span<double> grad) override;

 private:
  Mlp mlp_;
  std::vector<std::size_t> all_;
  const LabeledDataset* ds_;
  LossConfig cfg_;
};

struct ChainRecord {
  /// Step index of each recorded entry (0, s, 2s, ..., and the final step).
  std::vector<std::size_t> steps;
  std::vector<double> loss;      // full-data surrogate loss
  std::vector<double> zero_one;  // full-data 0-1 error
  /// Held-out 0-1 error, only when an evaluation set was supplied.
  std::vector<double> heldout_zero_one;
  ParamVector final_params;
  std::size_t stop_step = 0;  // T
  bool stopped_by_rule = false;
  double ergodic_mean_loss = 0.0;
  double ergodic_mean_01 = 0.0;
  std::optional<double> ergodic_mean_heldout_01;
  RunningMean stop_filter;
  RunningMean ergodic_filter;
  RunningMean ergodic_01_filter;
};

/// One Langevin update:
///   h - eta grad - eta h / (beta sigma^2) + sqrt(2 eta / beta) noise.
/// For beta = 0 the result is sigma * noise, a fresh prior draw. Throws
/// ChainDiverged if the result is not finite or exceeds the divergence
/// limit.
ParamVector lmc_step(std::span<const double> h, std::span<const double> grad,
                     const SamplerConfig& cfg, std::span<const double> noise);

/// In-place variant used by run_chain.
void lmc_step_inplace(std::span<double> h, std::span<const double> grad,
                      const SamplerConfig& cfg, std::span<const double> noise);

struct ChainOptions {
  /// Starting point; drawn from the prior when absent.
  std::optional<ParamVector> initial_params;
  /// Evaluation-only objective whose 0-1 error is tracked along the chain.
  Objective* heldout = nullptr;
};

/// Runs one chain until the stopping rule fires or max_steps is reached.
/// Deterministic in cfg.seed.
ChainRecord run_chain(Objective& objective, const SamplerConfig& cfg,
                      const StopConfig& stop, const ErgodicConfig& erg,
                      const ChainOptions& options = {});

ChainRecord run_chain(const LabeledDataset& ds, const Architecture& arch,
                      const LossConfig& loss_cfg, const SamplerConfig& cfg,
                      const StopConfig& stop, const ErgodicConfig& erg);

}  // namespace gibbs
