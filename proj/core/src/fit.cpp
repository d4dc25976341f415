#include "tome/fit.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace tome {

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw std::invalid_argument("fit_line: need at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      ss += r * r;
    }
    f.slope_se = std::sqrt(ss / (n - 2) / sxx);
  }
  return f;
}

double fit_loglog_slope(std::span<const double> x, std::span<const double> y, double lo, double hi) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] >= lo && x[i] <= hi && x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  return fit_line(lx, ly).slope;
}

namespace {

struct Projected {
  double chi2, amplitude, offset;
};

Projected project(const std::vector<double>& t, const std::vector<double>& y,
                  const std::vector<double>& w, double rate) {
  // Normal equations for y ~ offset + amplitude * e.
  double s1 = 0, se = 0, see = 0, sy = 0, sey = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double e = std::exp(-rate * t[i]);
    s1 += w[i];
    se += w[i] * e;
    see += w[i] * e * e;
    sy += w[i] * y[i];
    sey += w[i] * e * y[i];
  }
  const double det = s1 * see - se * se;
  Projected p{};
  p.amplitude = (s1 * sey - se * sy) / det;
  p.offset = (see * sy - se * sey) / det;
  double chi2 = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double r = y[i] - p.offset - p.amplitude * std::exp(-rate * t[i]);
    chi2 += w[i] * r * r;
  }
  p.chi2 = chi2;
  return p;
}

}  // namespace

RelaxationFit fit_exponential_relaxation(std::span<const double> t, std::span<const double> y,
                                         std::span<const double> se, double t_min, double t_max,
                                         double rate_lo, double rate_hi) {
  std::vector<double> tt, yy, ww;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_min || t[i] > t_max) continue;
    double w = 1.0;
    if (!se.empty()) {
      if (!(se[i] > 0.0)) continue;
      w = 1.0 / (se[i] * se[i]);
    }
    tt.push_back(t[i]);
    yy.push_back(y[i]);
    ww.push_back(w);
  }
  if (tt.size() < 4) throw std::invalid_argument("fit_exponential_relaxation: fewer than 4 points in window");
  if (!(rate_lo > 0.0) || !(rate_hi > rate_lo)) throw std::invalid_argument("fit_exponential_relaxation: bad rate bracket");

  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = std::log(rate_lo), b = std::log(rate_hi);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = project(tt, yy, ww, std::exp(c)).chi2, fd = project(tt, yy, ww, std::exp(d)).chi2;
  while (b - a > 1e-10) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = project(tt, yy, ww, std::exp(c)).chi2;
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = project(tt, yy, ww, std::exp(d)).chi2;
    }
  }
  const double rate = std::exp(0.5 * (a + b));
  const Projected p = project(tt, yy, ww, rate);
  return RelaxationFit{rate, p.amplitude, p.offset, p.chi2};
}

}  // namespace tome
