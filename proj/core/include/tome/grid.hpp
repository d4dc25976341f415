#pragma once

#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tome {

/// Uniform mesh on [x_min, x_max] split into n_cells cells.
struct UniformGrid {
  double x_min = -1.0;
  double x_max = 1.0;
  int n_cells = 2;

  static UniformGrid symmetric(double half_width, int n_cells);

  double dx() const { return (x_max - x_min) / n_cells; }
  double node(int i) const { return x_min + i * dx(); }
  double center(int i) const { return x_min + (i + 0.5) * dx(); }
  bool is_symmetric() const;

  /// Throws std::invalid_argument unless x_min < x_max and n_cells >= 2.
  void validate() const;
};

/// Samples live on the n_cells + 1 nodes (analytic curves) or on the n_cells
/// cell centres (finite-volume solutions).
enum class GridLayout { Nodes, Cells };

/// Open: support continues past the grid and the tail model describes it.
/// Reflecting: zero-flux walls at the grid edges, no mass beyond.
enum class Boundary { Open, Reflecting };

/// Power-law continuation f(x) ~ c |x|^-alpha (1 + d / x^2) beyond each edge.
struct TailModel {
  double exponent = std::numeric_limits<double>::infinity();  // infinity: no tail
  double amp_left = 0.0, corr_left = 0.0;
  double amp_right = 0.0, corr_right = 0.0;

  bool active() const { return exponent < std::numeric_limits<double>::infinity(); }
};

/// A probability density sampled on a uniform grid.
struct GridPdf {
  UniformGrid grid;
  GridLayout layout = GridLayout::Nodes;
  Boundary boundary = Boundary::Open;
  std::vector<double> values;
  TailModel tail;
  double mass = 0.0;  // integral including tail mass

  int size() const { return static_cast<int>(values.size()); }
  double x(int i) const { return layout == GridLayout::Nodes ? grid.node(i) : grid.center(i); }
  std::vector<double> abscissae() const;
};

/// Evaluation points for a grid in the requested layout.
std::vector<double> grid_points(const UniformGrid& grid, GridLayout layout);

struct Normalized {
  double norm_constant = 0.0;
  GridPdf pdf;
};

/// Normalizes non-negative node values f on a symmetric grid with an even cell
/// count: composite Simpson on the grid plus the integral of a power-law tail
/// c |x|^-tail_exponent (1 + d/x^2) fitted at each edge. tail_exponent =
/// infinity skips the tail. Throws std::invalid_argument for tail_exponent <= 1,
/// values below -1e-13, odd cell counts or asymmetric grids.
Normalized normalize_on_grid(std::span<const double> f, const UniformGrid& grid,
                             double tail_exponent);

/// Fits the two-term tail model at both edges of node-sampled values.
TailModel fit_power_tail(std::span<const double> f, const UniformGrid& grid, double exponent);

/// integral over the grid (Simpson on nodes, midpoint on cells) plus tail.
double total_mass(const GridPdf& pdf);

/// integral x^n P(x) dx including the tail; +infinity when the tail makes the
/// moment diverge (exponent <= n + 1).
double grid_moment(const GridPdf& pdf, int n);

/// integral |p - q| dx over the common grid (trapezoid on nodes, midpoint on cells).
double l1_distance(const GridPdf& p, const GridPdf& q);

/// Linear interpolation, zero outside the grid.
double interpolate(const GridPdf& pdf, double x);

/// Two-column CSV `x,density` preceded by `# key=value` header lines.
void write_csv(std::ostream& out, const GridPdf& pdf,
               const std::vector<std::pair<std::string, std::string>>& header);

/// Formats a double so that identical values always print identically.
std::string format_number(double v);

}  // namespace tome
