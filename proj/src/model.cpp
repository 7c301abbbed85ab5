#include "gibbsbound/model.hpp"

#include <charconv>
#include <random>
#include <sstream>
#include <stdexcept>

#include "gibbsbound/kernels.hpp"
#include "gibbsbound/rng.hpp"

namespace gibbs {
namespace {

// log(1 + exp(-m)) without overflow.
double softplus_neg(double m) {
  return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

// 1 / (1 + exp(-x))
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void Architecture::validate() const {
  if (widths.size() < 2)
    throw std::invalid_argument("architecture needs an input and an output width");
  for (auto w : widths)
    if (w == 0) throw std::invalid_argument("architecture widths must be positive");
  if (widths.back() != 1)
    throw std::invalid_argument("architecture must end in a single output unit");
}

std::size_t Architecture::param_count() const {
  std::size_t d = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
    d += widths[l] * widths[l + 1] + widths[l + 1];
  return d;
}

std::size_t Architecture::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += widths[l] * widths[l + 1] + widths[l + 1];
  return off;
}

std::size_t Architecture::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + widths[layer] * widths[layer + 1];
}

Architecture Architecture::parse(std::string_view text) {
  Architecture arch;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    auto token = text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    std::size_t w = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), w);
    if (ec != std::errc() || ptr != token.data() + token.size())
      throw std::invalid_argument("bad architecture width '" + std::string(token) + "'");
    arch.widths.push_back(w);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  arch.validate();
  return arch;
}

std::string Architecture::to_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < widths.size(); ++i) os << (i ? "," : "") << widths[i];
  return os.str();
}

void LossConfig::validate() const {
  if (kind == LossKind::BoundedBCE && !(p_min > 0.0 && p_min < 1.0))
    throw std::invalid_argument("bounded cross-entropy needs p_min in (0, 1)");
  if (!std::isfinite(threshold)) throw std::invalid_argument("threshold must be finite");
}

std::string_view loss_kind_name(LossKind kind) {
  return kind == LossKind::Savage ? "savage" : "bbce";
}

LossKind parse_loss_kind(std::string_view text) {
  if (text == "bbce" || text == "bounded_bce") return LossKind::BoundedBCE;
  if (text == "savage") return LossKind::Savage;
  throw std::invalid_argument("unknown loss kind '" + std::string(text) + "'");
}

ParamVector init_params(const Architecture& arch, double prior_width,
                        std::uint64_t seed) {
  arch.validate();
  if (!(prior_width > 0.0)) throw std::invalid_argument("prior width must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, prior_width);
  ParamVector h(arch.param_count());
  for (auto& v : h) v = normal(rng);
  return h;
}

double surrogate_loss(double score, int label, const LossConfig& cfg) {
  const double margin = label * score;
  switch (cfg.kind) {
    case LossKind::BoundedBCE: {
      const double cap = -std::log(cfg.p_min);
      return std::min(softplus_neg(margin), cap) / cap;
    }
    case LossKind::Savage: {
      const double s = sigmoid(-2.0 * margin);
      return s * s;
    }
  }
  return 0.0;
}

double surrogate_loss_derivative(double score, int label, const LossConfig& cfg) {
  const double margin = label * score;
  switch (cfg.kind) {
    case LossKind::BoundedBCE: {
      const double cap = -std::log(cfg.p_min);
      // Flat (derivative 0) on and past the clip boundary.
      if (softplus_neg(margin) >= cap) return 0.0;
      return -label * sigmoid(-margin) / cap;
    }
    case LossKind::Savage: {
      const double s = sigmoid(-2.0 * margin);
      return label * (-4.0 * s * s * (1.0 - s));
    }
  }
  return 0.0;
}

double zero_one_error(std::span<const double> scores, std::span<const int> labels,
                      double threshold) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("zero_one_error: scores and labels differ in length");
  if (scores.empty()) throw std::invalid_argument("zero_one_error: empty input");
  std::size_t errors = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (labels[i] * scores[i] < threshold) ++errors;
  return static_cast<double>(errors) / static_cast<double>(scores.size());
}

Mlp::Mlp(Architecture arch) : arch_(std::move(arch)) {
  arch_.validate();
  param_count_ = arch_.param_count();
  const std::size_t layers = arch_.layer_count();
  pre_.resize(layers);
  act_.resize(layers);
  delta_.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    pre_[l].assign(arch_.widths[l + 1], 0.0);
    act_[l].assign(arch_.widths[l + 1], 0.0);
    delta_[l].assign(arch_.widths[l + 1], 0.0);
  }
}

void Mlp::check_params(std::span<const double> params) const {
  if (params.size() != param_count_)
    throw std::invalid_argument("parameter vector has length " +
                                std::to_string(params.size()) + ", expected " +
                                std::to_string(param_count_));
}

void Mlp::check_features(const Matrix& features) const {
  if (features.cols != arch_.input_dim())
    throw std::invalid_argument("feature width " + std::to_string(features.cols) +
                                " does not match input dimension " +
                                std::to_string(arch_.input_dim()));
}

double Mlp::forward(std::span<const double> params, std::span<const double> x) {
  std::span<const double> input = x;
  const std::size_t layers = arch_.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = arch_.widths[l];
    const std::size_t out = arch_.widths[l + 1];
    const double* w = params.data() + arch_.weight_offset(l);
    const double* b = w + in * out;
    auto& z = pre_[l];
    for (std::size_t j = 0; j < out; ++j)
      z[j] = kernels::dot({w + j * in, in}, input) + b[j];
    if (l + 1 < layers) {
      kernels::relu(z, act_[l]);
    } else {
      act_[l] = z;
    }
    input = act_[l];
  }
  return act_.back()[0];
}

double Mlp::score(std::span<const double> params, std::span<const double> x) {
  check_params(params);
  if (x.size() != arch_.input_dim())
    throw std::invalid_argument("input width does not match the architecture");
  return forward(params, x);
}

std::vector<double> Mlp::forward_scores(std::span<const double> params,
                                        const Matrix& features) {
  check_params(params);
  check_features(features);
  std::vector<double> scores(features.rows);
  for (std::size_t i = 0; i < features.rows; ++i)
    scores[i] = forward(params, features.row(i));
  return scores;
}

double Mlp::loss_and_gradient(std::span<const double> params, const LabeledDataset& ds,
                              std::span<const std::size_t> batch, const LossConfig& cfg,
                              std::span<double> grad, std::size_t* errors) {
  check_params(params);
  check_features(ds.features);
  if (batch.empty()) throw std::invalid_argument("loss_and_gradient: empty batch");
  if (grad.size() != param_count_)
    throw std::invalid_argument("gradient buffer has the wrong length");

  std::fill(grad.begin(), grad.end(), 0.0);
  const std::size_t layers = arch_.layer_count();
  double total_loss = 0.0;
  std::size_t error_count = 0;

  for (const std::size_t idx : batch) {
    const auto x = ds.features.row(idx);
    const int y = ds.labels[idx];
    const double s = forward(params, x);
    total_loss += surrogate_loss(s, y, cfg);
    if (y * s < cfg.threshold) ++error_count;
    const double ds_out = surrogate_loss_derivative(s, y, cfg);
    if (ds_out == 0.0) continue;

    delta_[layers - 1][0] = ds_out;
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in = arch_.widths[l];
      const std::size_t out = arch_.widths[l + 1];
      const std::size_t w_off = arch_.weight_offset(l);
      const double* w = params.data() + w_off;
      double* gw = grad.data() + w_off;
      double* gb = gw + in * out;
      std::span<const double> input = l == 0 ? x : std::span<const double>(act_[l - 1]);
      const auto& delta = delta_[l];

      for (std::size_t j = 0; j < out; ++j) {
        if (delta[j] == 0.0) continue;
        kernels::axpy(delta[j], input, {gw + j * in, in});
        gb[j] += delta[j];
      }
      if (l == 0) break;

      auto& prev = delta_[l - 1];
      std::fill(prev.begin(), prev.end(), 0.0);
      for (std::size_t j = 0; j < out; ++j) {
        if (delta[j] == 0.0) continue;
        kernels::axpy(delta[j], {w + j * in, in}, prev);
      }
      kernels::relu_mask(pre_[l - 1], prev);
    }
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& g : grad) g *= inv;
  if (errors) *errors = error_count;
  return total_loss * inv;
}

Evaluation Mlp::evaluate(std::span<const double> params, const LabeledDataset& ds,
                         const LossConfig& cfg) {
  check_params(params);
  check_features(ds.features);
  if (ds.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  double loss = 0.0;
  std::size_t errors = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double s = forward(params, ds.features.row(i));
    const int y = ds.labels[i];
    loss += surrogate_loss(s, y, cfg);
    if (y * s < cfg.threshold) ++errors;
  }
  // Same normalization as loss_and_gradient, so both paths agree bitwise.
  const double inv = 1.0 / static_cast<double>(ds.size());
  return {loss * inv, static_cast<double>(errors) * inv};
}

std::vector<double> forward_scores(const Architecture& arch,
                                   std::span<const double> params,
                                   const Matrix& features) {
  Mlp mlp(arch);
  return mlp.forward_scores(params, features);
}

std::pair<double, ParamVector> loss_and_gradient(const Architecture& arch,
                                                 std::span<const double> params,
                                                 const LabeledDataset& ds,
                                                 std::span<const std::size_t> batch,
                                                 const LossConfig& cfg) {
  Mlp mlp(arch);
  ParamVector grad(mlp.param_count());
  const double loss = mlp.loss_and_gradient(params, ds, batch, cfg, grad);
  return {loss, std::move(grad)};
}

}  // namespace gibbs
