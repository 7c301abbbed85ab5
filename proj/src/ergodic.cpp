#include "gibbsbound/ergodic.hpp"

#include <stdexcept>
#include <string>

namespace gibbs {

std::string_view filter_form_name(FilterForm form) {
  return form == FilterForm::Symmetric ? "symmetric" : "ema";
}

FilterForm parse_filter_form(std::string_view text) {
  if (text == "symmetric") return FilterForm::Symmetric;
  if (text == "ema") return FilterForm::EMA;
  throw std::invalid_argument("unknown filter form '" + std::string(text) + "'");
}

RunningMean::RunningMean(FilterForm f, double a) : form(f), alpha(a) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("filter alpha must lie in (0, 1]");
}

void RunningMean::update(double x) {
  if (form == FilterForm::EMA) {
    value = alpha * x + (1.0 - alpha) * value;
  } else {
    if (count == 0) previous = x;
    value = (alpha / 2.0) * x + (alpha / 2.0) * previous + (1.0 - alpha) * value;
  }
  previous = x;
  ++count;
}

void StopConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("stop epsilon must be positive");
  if (min_steps < 1) throw std::invalid_argument("min_steps must be at least 1");
}

bool should_stop(double previous_value, double current_value, std::size_t t,
                 const StopConfig& cfg) {
  if (t < cfg.min_steps) return false;
  return current_value - previous_value >= cfg.epsilon;
}

}  // namespace gibbs
