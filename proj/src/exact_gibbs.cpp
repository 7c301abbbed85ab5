#include "gibbsbound/exact_gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "gibbsbound/bounds.hpp"

namespace gibbs {
namespace {

// ln(prior_i) - beta L_i and its maximum.
std::vector<double> log_terms(const FiniteHypothesisSpace& space, double beta,
                              double& max_out) {
  std::vector<double> t(space.size());
  max_out = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < space.size(); ++i) {
    t[i] = std::log(space.prior[i]) - beta * space.emp_losses[i];
    max_out = std::max(max_out, t[i]);
  }
  return t;
}

void require_beta(double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw std::invalid_argument("inverse temperature must be finite and >= 0");
}

}  // namespace

void FiniteHypothesisSpace::validate() const {
  if (prior.empty()) throw std::invalid_argument("hypothesis space is empty");
  if (emp_losses.size() != prior.size())
    throw std::invalid_argument("prior and empirical losses differ in length");
  if (!true_losses.empty() && true_losses.size() != prior.size())
    throw std::invalid_argument("true losses have the wrong length");
  if (!emp_01.empty() && emp_01.size() != prior.size())
    throw std::invalid_argument("0-1 rates have the wrong length");
  double total = 0.0;
  for (double p : prior) {
    if (!(p > 0.0)) throw std::invalid_argument("prior weights must be positive");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-12)
    throw std::invalid_argument("prior weights must sum to 1");
  auto in_unit = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0 && x <= 1.0; });
  };
  if (!in_unit(emp_losses) || !in_unit(true_losses) || !in_unit(emp_01))
    throw std::invalid_argument("losses must lie in [0, 1]");
}

FiniteHypothesisSpace parse_space(const std::string& text) {
  FiniteHypothesisSpace space;
  std::istringstream in(text);
  std::string line;
  std::size_t columns = 0;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream row(line);
    std::vector<double> v;
    double x = 0.0;
    while (row >> x) v.push_back(x);
    if (v.size() < 2 || v.size() > 4)
      throw std::invalid_argument("hypothesis row needs 2 to 4 columns: '" + line + "'");
    if (columns == 0) columns = v.size();
    if (v.size() != columns)
      throw std::invalid_argument("inconsistent column count in hypothesis table");
    space.prior.push_back(v[0]);
    space.emp_losses.push_back(v[1]);
    if (columns > 2) space.true_losses.push_back(v[2]);
    if (columns > 3) space.emp_01.push_back(v[3]);
  }
  space.validate();
  return space;
}

FiniteHypothesisSpace load_space(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_space(buf.str());
}

std::string format_space(const FiniteHypothesisSpace& space) {
  std::ostringstream os;
  os.precision(17);
  os << "# prior emp_loss";
  if (!space.true_losses.empty()) os << " true_loss";
  if (!space.emp_01.empty()) os << " emp_01";
  os << '\n';
  for (std::size_t i = 0; i < space.size(); ++i) {
    os << space.prior[i] << ' ' << space.emp_losses[i];
    if (!space.true_losses.empty()) os << ' ' << space.true_losses[i];
    if (!space.emp_01.empty()) os << ' ' << space.emp_01[i];
    os << '\n';
  }
  return os.str();
}

double log_partition_function(const FiniteHypothesisSpace& space, double beta) {
  require_beta(beta);
  double shift = 0.0;
  const auto t = log_terms(space, beta, shift);
  double sum = 0.0;
  for (double v : t) sum += std::exp(v - shift);
  return shift + std::log(sum);
}

double partition_function(const FiniteHypothesisSpace& space, double beta) {
  if (beta == 0.0) return 1.0;
  return std::exp(log_partition_function(space, beta));
}

std::vector<double> gibbs_weights(const FiniteHypothesisSpace& space, double beta) {
  require_beta(beta);
  double shift = 0.0;
  auto w = log_terms(space, beta, shift);
  double sum = 0.0;
  for (auto& v : w) {
    v = std::exp(v - shift);
    sum += v;
  }
  for (auto& v : w) v /= sum;
  return w;
}

double posterior_expectation(const FiniteHypothesisSpace& space, double beta,
                             std::span<const double> values) {
  if (values.size() != space.size())
    throw std::invalid_argument("posterior_expectation: length mismatch");
  const auto w = gibbs_weights(space, beta);
  double e = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) e += w[i] * values[i];
  return e;
}

double posterior_mean_loss(const FiniteHypothesisSpace& space, double beta) {
  return posterior_expectation(space, beta, space.emp_losses);
}

double heat_capacity(const FiniteHypothesisSpace& space, double beta) {
  const auto w = gibbs_weights(space, beta);
  double mean = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) mean += w[i] * space.emp_losses[i];
  double var = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = space.emp_losses[i] - mean;
    var += w[i] * d * d;
  }
  return -var;
}

FreeEnergyCheck free_energy_identity_check(const FiniteHypothesisSpace& space,
                                           double beta, std::size_t quad_steps) {
  require_beta(beta);
  if (quad_steps < 2) throw std::invalid_argument("quadrature needs at least 2 panels");
  if (quad_steps % 2 != 0) ++quad_steps;
  FreeEnergyCheck out;
  out.lhs = -log_partition_function(space, beta);
  if (beta == 0.0) {
    out.lhs = 0.0;
    return out;
  }
  const double h = beta / static_cast<double>(quad_steps);
  double acc = posterior_mean_loss(space, 0.0) + posterior_mean_loss(space, beta);
  for (std::size_t i = 1; i < quad_steps; ++i) {
    const double g = posterior_mean_loss(space, h * static_cast<double>(i));
    acc += (i % 2 == 1 ? 4.0 : 2.0) * g;
  }
  out.rhs = acc * h / 3.0;
  return out;
}

double exact_gamma(const FiniteHypothesisSpace& space, const TemperatureLadder& ladder,
                   std::size_t h_index) {
  if (h_index >= space.size()) throw std::out_of_range("hypothesis index out of range");
  const auto& b = ladder.betas();
  double gamma = -b.back() * space.emp_losses[h_index];
  for (std::size_t k = 1; k < b.size(); ++k)
    gamma += (b[k] - b[k - 1]) * posterior_mean_loss(space, b[k - 1]);
  return gamma;
}

double gibbs_kl(const FiniteHypothesisSpace& space, double beta_a, double beta_b) {
  const auto wa = gibbs_weights(space, beta_a);
  const auto wb = gibbs_weights(space, beta_b);
  double kl = 0.0;
  for (std::size_t i = 0; i < wa.size(); ++i)
    if (wa[i] > 0.0) kl += wa[i] * std::log(wa[i] / wb[i]);
  return std::max(kl, 0.0);
}

std::size_t sample_gibbs(const FiniteHypothesisSpace& space, double beta, Rng& rng) {
  const auto w = gibbs_weights(space, beta);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double cum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    cum += w[i];
    if (u < cum) return i;
  }
  return w.size() - 1;
}

}  // namespace gibbs
