#include "tome/grid.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace tome {
namespace {

double simpson(std::span<const double> f, double h) {
  const std::size_t n = f.size() - 1;
  double odd = 0.0, even = 0.0;
  for (std::size_t i = 1; i < n; i += 2) odd += f[i];
  for (std::size_t i = 2; i < n; i += 2) even += f[i];
  return h / 3.0 * (f.front() + f.back() + 4.0 * odd + 2.0 * even);
}

// c x^-alpha (1 + d/x^2) from two samples on one side.
std::pair<double, double> fit_side(double x_edge, double f_edge, double x_inner, double f_inner,
                                   double alpha) {
  if (f_edge <= 0.0) return {0.0, 0.0};
  const double g_edge = f_edge * std::pow(x_edge, alpha);
  const double g_inner = f_inner * std::pow(x_inner, alpha);
  const double cd = (g_inner - g_edge) / (1.0 / (x_inner * x_inner) - 1.0 / (x_edge * x_edge));
  const double c = g_edge - cd / (x_edge * x_edge);
  // A correction larger than the leading term means the edge is not yet in the
  // power-law regime; keep the amplitude fit only.
  if (!(c > 0.0) || std::abs(cd / (x_edge * x_edge)) > 0.5 * c) return {g_edge, 0.0};
  return {c, cd / c};
}

// integral_L^inf x^n c x^-alpha (1 + d/x^2) dx
double tail_integral(double amp, double corr, double alpha, double edge, int n) {
  if (amp == 0.0) return 0.0;
  const double p = alpha - n;
  if (!(p > 1.0)) return std::numeric_limits<double>::infinity();
  return amp * (std::pow(edge, 1.0 - p) / (p - 1.0) + corr * std::pow(edge, -1.0 - p) / (p + 1.0));
}

double grid_integral(const GridPdf& pdf, int n) {
  const double h = pdf.grid.dx();
  std::vector<double> w(pdf.values.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double x = pdf.x(static_cast<int>(i));
    w[i] = pdf.values[i] * (n == 0 ? 1.0 : std::pow(x, n));
  }
  double body = 0.0;
  if (pdf.layout == GridLayout::Nodes) {
    if (pdf.grid.n_cells % 2 == 0) {
      body = simpson(w, h);
    } else {
      for (std::size_t i = 0; i + 1 < w.size(); ++i) body += 0.5 * h * (w[i] + w[i + 1]);
    }
  } else {
    for (double v : w) body += v * h;
  }
  if (pdf.boundary == Boundary::Reflecting || !pdf.tail.active()) return body;
  const double alpha = pdf.tail.exponent;
  const double right = tail_integral(pdf.tail.amp_right, pdf.tail.corr_right, alpha, pdf.grid.x_max, n);
  double left = tail_integral(pdf.tail.amp_left, pdf.tail.corr_left, alpha, -pdf.grid.x_min, n);
  if (n % 2 == 1) left = -left;
  return body + right + left;
}

}  // namespace

UniformGrid UniformGrid::symmetric(double half_width, int n_cells) {
  UniformGrid g{-half_width, half_width, n_cells};
  g.validate();
  return g;
}

bool UniformGrid::is_symmetric() const {
  return std::abs(x_min + x_max) <= 1e-12 * std::max(std::abs(x_min), std::abs(x_max));
}

void UniformGrid::validate() const {
  if (!std::isfinite(x_min) || !std::isfinite(x_max) || !(x_min < x_max)) {
    throw std::invalid_argument("grid: need finite x_min < x_max");
  }
  if (n_cells < 2) throw std::invalid_argument("grid: need at least two cells");
}

std::vector<double> grid_points(const UniformGrid& grid, GridLayout layout) {
  const int n = layout == GridLayout::Nodes ? grid.n_cells + 1 : grid.n_cells;
  std::vector<double> xs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) xs[i] = layout == GridLayout::Nodes ? grid.node(i) : grid.center(i);
  return xs;
}

std::vector<double> GridPdf::abscissae() const { return grid_points(grid, layout); }

TailModel fit_power_tail(std::span<const double> f, const UniformGrid& grid, double exponent) {
  TailModel tail;
  tail.exponent = exponent;
  if (!tail.active()) return tail;
  const int n = grid.n_cells;
  // Inner sample at roughly 80% of the half width.
  const int offset = std::max(1, n / 10);
  const auto [cr, dr] = fit_side(grid.node(n), f[n], grid.node(n - offset), f[n - offset], exponent);
  const auto [cl, dl] = fit_side(-grid.node(0), f[0], -grid.node(offset), f[offset], exponent);
  tail.amp_right = cr;
  tail.corr_right = dr;
  tail.amp_left = cl;
  tail.corr_left = dl;
  return tail;
}

Normalized normalize_on_grid(std::span<const double> f, const UniformGrid& grid,
                             double tail_exponent) {
  grid.validate();
  if (static_cast<int>(f.size()) != grid.n_cells + 1) {
    throw std::invalid_argument("normalize_on_grid: expected n_cells + 1 node values");
  }
  if (grid.n_cells % 2 != 0) throw std::invalid_argument("normalize_on_grid: n_cells must be even");
  if (!grid.is_symmetric()) throw std::invalid_argument("normalize_on_grid: grid must be symmetric about 0");
  if (!(tail_exponent > 1.0)) {
    throw std::invalid_argument("normalize_on_grid: tail exponent must exceed 1 (non-integrable tail)");
  }
  for (double v : f) {
    if (!(v >= -1e-13)) throw std::invalid_argument("normalize_on_grid: negative or NaN density value");
  }

  GridPdf pdf;
  pdf.grid = grid;
  pdf.layout = GridLayout::Nodes;
  pdf.boundary = Boundary::Open;
  pdf.values.assign(f.begin(), f.end());
  pdf.tail = fit_power_tail(f, grid, tail_exponent);
  const double norm = grid_integral(pdf, 0);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw std::invalid_argument("normalize_on_grid: function has zero or infinite integral");
  }
  for (double& v : pdf.values) v /= norm;
  pdf.tail.amp_left /= norm;
  pdf.tail.amp_right /= norm;
  pdf.mass = grid_integral(pdf, 0);
  return Normalized{norm, std::move(pdf)};
}

double total_mass(const GridPdf& pdf) { return grid_integral(pdf, 0); }

double grid_moment(const GridPdf& pdf, int n) {
  if (pdf.boundary == Boundary::Open && pdf.tail.active() && pdf.tail.exponent <= n + 1.0) {
    return std::numeric_limits<double>::infinity();
  }
  return grid_integral(pdf, n);
}

double l1_distance(const GridPdf& p, const GridPdf& q) {
  if (p.values.size() != q.values.size() || p.layout != q.layout ||
      p.grid.x_min != q.grid.x_min || p.grid.x_max != q.grid.x_max) {
    throw std::invalid_argument("l1_distance: PDFs live on different grids");
  }
  const double h = p.grid.dx();
  double sum = 0.0;
  if (p.layout == GridLayout::Cells) {
    for (std::size_t i = 0; i < p.values.size(); ++i) sum += std::abs(p.values[i] - q.values[i]) * h;
  } else {
    for (std::size_t i = 0; i + 1 < p.values.size(); ++i) {
      sum += 0.5 * h * (std::abs(p.values[i] - q.values[i]) + std::abs(p.values[i + 1] - q.values[i + 1]));
    }
  }
  return sum;
}

double interpolate(const GridPdf& pdf, double x) {
  const double h = pdf.grid.dx();
  const double origin = pdf.layout == GridLayout::Nodes ? pdf.grid.x_min : pdf.grid.x_min + 0.5 * h;
  const double s = (x - origin) / h;
  const int n = pdf.size();
  if (s < 0.0 || s > n - 1) return 0.0;
  const int i = std::min(static_cast<int>(s), n - 2);
  const double t = s - i;
  return (1.0 - t) * pdf.values[i] + t * pdf.values[i + 1];
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

void write_csv(std::ostream& out, const GridPdf& pdf,
               const std::vector<std::pair<std::string, std::string>>& header) {
  for (const auto& [k, v] : header) out << "# " << k << '=' << v << '\n';
  out << "x,density\n";
  for (int i = 0; i < pdf.size(); ++i) out << format_number(pdf.x(i)) << ',' << format_number(pdf.values[i]) << '\n';
}

}  // namespace tome
