#pragma once

// First-order recursive lowpass filters over a chain's loss trajectory and
// the stopping rule built on them.

#include <cstddef>
#include <string_view>

namespace gibbs {

enum class FilterForm {
  /// M_t = (a/2) x_t + (a/2) x_{t-1} + (1 - a) M_{t-1}
  Symmetric,
  /// M_t = a x_t + (1 - a) M_{t-1}
  EMA,
};

std::string_view filter_form_name(FilterForm form);
FilterForm parse_filter_form(std::string_view text);

inline constexpr double kDefaultStopAlpha = 0.0025;
inline constexpr double kDefaultErgodicAlpha = 0.01;

struct RunningMean {
  FilterForm form = FilterForm::EMA;
  double alpha = kDefaultErgodicAlpha;
  double value = 0.0;     // M_t, M_0 = 0
  double previous = 0.0;  // x_{t-1}
  std::size_t count = 0;  // t

  RunningMean() = default;
  RunningMean(FilterForm f, double a);

  /// The first Symmetric update uses x_0 := x_1.
  void update(double x);
};

struct StopConfig {
  double epsilon = 1e-7;
  std::size_t min_steps = 4000;

  void validate() const;
};

/// False before min_steps; afterwards true iff the stop filter rose by at
/// least epsilon in the last step.
bool should_stop(double previous_value, double current_value, std::size_t t,
                 const StopConfig& cfg);

}  // namespace gibbs
