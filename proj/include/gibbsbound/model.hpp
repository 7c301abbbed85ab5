#pragma once

// Fully connected ReLU networks with a scalar output, hand-coded
// backpropagation, the bounded surrogate losses and the thresholded 0-1
// loss.
//
// Parameter layout: for each layer l = 1..L, the weight matrix
// W_l (out x in, row-major) followed by the bias vector b_l (out).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gibbsbound/data.hpp"

namespace gibbs {

using ParamVector = std::vector<double>;

struct Architecture {
  /// [d_in, w_1, ..., w_L, 1]
  std::vector<std::size_t> widths;

  /// Throws std::invalid_argument unless there are >= 2 positive widths
  /// ending in 1.
  void validate() const;
  std::size_t input_dim() const { return widths.front(); }
  std::size_t layer_count() const { return widths.size() - 1; }
  std::size_t param_count() const;
  /// Offset of W_l within a ParamVector (layer is 0-based).
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;

  /// Parses "784,1000,1000,1".
  static Architecture parse(std::string_view text);
  std::string to_string() const;
};

enum class LossKind { BoundedBCE, Savage };

struct LossConfig {
  LossKind kind = LossKind::BoundedBCE;
  /// Clip level of the bounded cross-entropy; default e^-4.
  double p_min = 0.01831563888873418;
  /// Margin threshold of the 0-1 loss: an example counts as an error iff
  /// y * score < threshold.
  double threshold = 0.0;

  void validate() const;
};

std::string_view loss_kind_name(LossKind kind);
LossKind parse_loss_kind(std::string_view text);

/// i.i.d. N(0, sigma^2) coordinates. Throws std::invalid_argument if
/// sigma <= 0.
ParamVector init_params(const Architecture& arch, double prior_width,
                        std::uint64_t seed);

/// Surrogate loss in [0, 1] of a single (score, label) pair.
double surrogate_loss(double score, int label, const LossConfig& cfg);

/// Derivative of surrogate_loss with respect to the score.
double surrogate_loss_derivative(double score, int label, const LossConfig& cfg);

/// Fraction of examples with y * score < threshold. Throws on empty or
/// mismatched input.
double zero_one_error(std::span<const double> scores, std::span<const int> labels,
                      double threshold);

/// Mean surrogate loss and mean 0-1 error over a set of examples.
struct Evaluation {
  double loss = 0.0;
  double zero_one = 0.0;
};

/// An evaluator for one architecture. Holds scratch buffers, so one
/// instance per thread.
class Mlp {
 public:
  explicit Mlp(Architecture arch);

  const Architecture& arch() const { return arch_; }
  std::size_t param_count() const { return param_count_; }

  double score(std::span<const double> params, std::span<const double> x);
  std::vector<double> forward_scores(std::span<const double> params,
                                     const Matrix& features);

  /// Mean loss over the examples indexed by `batch` (in the given order);
  /// writes the exact gradient of that mean into `grad`. When `errors` is
  /// given it receives the number of 0-1 errors in the batch.
  double loss_and_gradient(std::span<const double> params, const LabeledDataset& ds,
                           std::span<const std::size_t> batch, const LossConfig& cfg,
                           std::span<double> grad, std::size_t* errors = nullptr);

  Evaluation evaluate(std::span<const double> params, const LabeledDataset& ds,
                      const LossConfig& cfg);

 private:
  void check_params(std::span<const double> params) const;
  void check_features(const Matrix& features) const;
  double forward(std::span<const double> params, std::span<const double> x);

  Architecture arch_;
  std::size_t param_count_;
  // pre_[l] and act_[l] hold layer l's pre-activations and activations.
  std::vector<std::vector<double>> pre_;
  std::vector<std::vector<double>> act_;
  std::vector<std::vector<double>> delta_;
};

// Convenience wrappers matching the functional interface.
std::vector<double> forward_scores(const Architecture& arch,
                                   std::span<const double> params,
                                   const Matrix& features);
std::pair<double, ParamVector> loss_and_gradient(const Architecture& arch,
                                                 std::span<const double> params,
                                                 const LabeledDataset& ds,
                                                 std::span<const std::size_t> batch,
                                                 const LossConfig& cfg);

}  // namespace gibbs
