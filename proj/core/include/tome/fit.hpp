#pragma once

#include <span>

namespace tome {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Slope of log y against log x over samples with lo <= x <= hi and y > 0.
double fit_loglog_slope(std::span<const double> x, std::span<const double> y, double lo, double hi);

struct RelaxationFit {
  double rate = 0.0;       // lambda in offset + amplitude exp(-lambda t)
  double amplitude = 0.0;
  double offset = 0.0;
  double chi2 = 0.0;
};

/// Weighted least squares fit of offset + amplitude exp(-rate t) over
/// t_min <= t <= t_max. Weights are 1/se^2 (unit weights when se is empty).
/// The rate is found by golden-section search in [rate_lo, rate_hi] with the
/// linear parameters projected out at each trial rate.
RelaxationFit fit_exponential_relaxation(std::span<const double> t, std::span<const double> y,
                                         std::span<const double> se, double t_min, double t_max,
                                         double rate_lo, double rate_hi);

}  // namespace tome
