#include "tome/pde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "tome/errors.hpp"

namespace tome {
namespace {

struct Stencil {
  int cells[4];
  double weights[4];
  int size = 0;
  void add(int cell, double w) {
    for (int k = 0; k < size; ++k) {
      if (cells[k] == cell) {
        weights[k] += w;
        return;
      }
    }
    cells[size] = cell;
    weights[size] = w;
    ++size;
  }
};

// Current through the face between cells k-1 and k as a linear combination of cells.
Stencil face_current(const FluxCoefficients& c, const UniformGrid& grid, int k) {
  const int n = grid.n_cells;
  const double h = grid.dx();
  const double xf = grid.node(k);
  const int left = k - 1, right = k;
  Stencil s;

  // a1 x P: the probability moves with velocity -a1 x, so the upwind cell is
  // on the side away from the origin.
  const double drift = c.a1 * xf;
  if (xf < 0.0) {
    if (left >= 1) {
      s.add(left, 1.5 * drift);
      s.add(left - 1, -0.5 * drift);
    } else {
      s.add(left, drift);
    }
  } else if (xf > 0.0) {
    if (right + 1 <= n - 1) {
      s.add(right, 1.5 * drift);
      s.add(right + 1, -0.5 * drift);
    } else {
      s.add(right, drift);
    }
  }

  const double diff = (c.d0 + c.d2 * xf * xf) / h;
  s.add(right, diff);
  s.add(left, -diff);

  if (c.c1 != 0.0) {
    const double third = c.c1 * xf / (h * h);
    if (left >= 1 && right + 1 <= n - 1) {
      s.add(left - 1, 0.5 * third);
      s.add(left, -0.5 * third);
      s.add(right, -0.5 * third);
      s.add(right + 1, 0.5 * third);
    } else if (left == 0) {
      s.add(0, third);
      s.add(1, -2.0 * third);
      s.add(2, third);
    } else {
      s.add(n - 3, third);
      s.add(n - 2, -2.0 * third);
      s.add(n - 1, third);
    }
  }
  return s;
}

double l1_diff(const std::vector<double>& a, const std::vector<double>& b, double h) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s * h;
}

double sum_mass(const std::vector<double>& p, double h) {
  double s = 0.0;
  for (double v : p) s += v;
  return s * h;
}

GridPdf make_cells(const UniformGrid& grid, std::vector<double> values) {
  GridPdf pdf;
  pdf.grid = grid;
  pdf.layout = GridLayout::Cells;
  pdf.boundary = Boundary::Reflecting;
  pdf.values = std::move(values);
  pdf.mass = sum_mass(pdf.values, grid.dx());
  return pdf;
}

void check_initial(const GridPdf& p0, const Generator& g) {
  if (p0.layout != GridLayout::Cells || p0.size() != g.grid.n_cells || p0.grid.x_min != g.grid.x_min ||
      p0.grid.x_max != g.grid.x_max) {
    throw std::invalid_argument("evolve: initial PDF must be cell-averaged on the generator grid");
  }
  if (std::abs(cell_mass(p0) - 1.0) > 1e-8) throw std::invalid_argument("evolve: initial PDF is not normalized");
}

void check_config(const EvolveConfig& c) {
  if (!(c.dt > 0.0)) throw std::invalid_argument("evolve: dt must be > 0");
  if (!(c.steady_tol > 0.0)) throw std::invalid_argument("evolve: steady_tol must be > 0");
  if (!(c.t_end >= 0.0)) throw std::invalid_argument("evolve: t_end must be >= 0");
  if (c.startup_steps < 0) throw std::invalid_argument("evolve: startup_steps must be >= 0");
}

// Shared stepping loop. `observe(t, P, rate)` returns false to stop.
template <typename Observe>
void march(const Generator& g, const EvolveConfig& config, std::vector<double>& p, double& t,
           long long& steps, double& max_drift, double& min_ratio, Observe&& observe) {
  const int n = g.grid.n_cells;
  const double h = g.grid.dx();
  // (I - dt/2 A) serves both the CN left side and the backward Euler half steps.
  const BandLU implicit(g.matrix.shifted(1.0, -0.5 * config.dt));
  const BandMatrix explicit_part = g.matrix.shifted(1.0, 0.5 * config.dt);
  std::vector<double> next(static_cast<std::size_t>(n));
  int startup = config.startup_steps;
  const double t_stop = config.t_end * (1.0 + 1e-12);
  while (t + 0.25 * config.dt < t_stop) {
    double step_dt;
    if (startup > 0) {
      next = p;
      implicit.solve(next);
      step_dt = 0.5 * config.dt;
      --startup;
    } else {
      explicit_part.multiply(p, next);
      implicit.solve(next);
      step_dt = config.dt;
    }
    const double drift = std::abs(sum_mass(next, h) - sum_mass(p, h));
    max_drift = std::max(max_drift, drift);
    const double rate = l1_diff(next, p, h) / step_dt;
    p.swap(next);
    t += step_dt;
    ++steps;
    const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
    if (*hi > 0.0) min_ratio = std::min(min_ratio, *lo / *hi);
    if (!observe(t, p, rate)) break;
  }
}

std::string undershoot_warning(double ratio) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "negative density undershoot: min P / max P = %.3e", ratio);
  return buf;
}

}  // namespace

Generator build_generator(const FluxCoefficients& coeffs, const UniformGrid& grid) {
  grid.validate();
  if (grid.n_cells < 64) throw std::invalid_argument("build_generator: need at least 64 cells");
  const int n = grid.n_cells;
  const double h = grid.dx();
  Generator g{grid, coeffs, BandMatrix(n, 2, 2)};
  for (int k = 1; k < n; ++k) {
    const Stencil s = face_current(coeffs, grid, k);
    for (int q = 0; q < s.size; ++q) {
      g.matrix.at(k - 1, s.cells[q]) += s.weights[q] / h;
      g.matrix.at(k, s.cells[q]) -= s.weights[q] / h;
    }
  }
  const auto sums = g.matrix.column_sums();
  for (int j = 0; j < n; ++j) {
    double scale = 0.0;
    for (int i = std::max(0, j - 2); i <= std::min(n - 1, j + 2); ++i) scale += std::abs(g.matrix.at(i, j));
    if (std::abs(sums[j]) > 1e-13 * std::max(scale, 1.0)) {
      throw NumericalError("build_generator: column " + std::to_string(j) + " does not conserve mass",
                           std::abs(sums[j]));
    }
  }
  return g;
}

double cell_mass(const GridPdf& pdf) { return sum_mass(pdf.values, pdf.grid.dx()); }

GridPdf gaussian_cells(const UniformGrid& grid, double variance) {
  if (!(variance > 0.0)) throw std::invalid_argument("gaussian_cells: variance must be > 0");
  const double h = grid.dx();
  const double s = std::sqrt(2.0 * variance);
  std::vector<double> v(static_cast<std::size_t>(grid.n_cells));
  for (int i = 0; i < grid.n_cells; ++i) {
    // Exact cell average of the Gaussian.
    const double a = grid.node(i) / s, b = grid.node(i + 1) / s;
    v[i] = 0.5 * (std::erf(b) - std::erf(a)) / h;
  }
  const double m = sum_mass(v, h);
  for (double& x : v) x /= m;
  return make_cells(grid, std::move(v));
}

GridPdf to_cells(const GridPdf& pdf, const UniformGrid& grid) {
  std::vector<double> v(static_cast<std::size_t>(grid.n_cells));
  for (int i = 0; i < grid.n_cells; ++i) v[i] = interpolate(pdf, grid.center(i));
  return make_cells(grid, std::move(v));
}

EvolveResult evolve(const GridPdf& p0, const Generator& generator, const EvolveConfig& config) {
  check_config(config);
  check_initial(p0, generator);
  std::vector<double> p = p0.values;
  std::vector<double> times = config.snapshot_times;
  std::sort(times.begin(), times.end());
  std::size_t next_snap = 0;

  EvolveResult r;
  r.min_density_ratio = 1.0;
  auto snap = [&](double t, const std::vector<double>& v, double rate) {
    Snapshot s;
    s.t = t;
    s.pdf = make_cells(generator.grid, v);
    s.mass = s.pdf.mass;
    s.min_density = *std::min_element(v.begin(), v.end());
    s.rate = rate;
    r.snapshots.push_back(std::move(s));
  };
  while (next_snap < times.size() && times[next_snap] <= 0.0) ++next_snap;
  snap(0.0, p, 0.0);
  double t = 0.0;
  double last_rate = 0.0;
  march(generator, config, p, t, r.steps, r.max_mass_drift_per_step, r.min_density_ratio,
        [&](double now, const std::vector<double>& v, double rate) {
          last_rate = rate;
          bool recorded = false;
          while (next_snap < times.size() && times[next_snap] <= now + 0.25 * config.dt) {
            if (!recorded) snap(now, v, rate);
            recorded = true;
            ++next_snap;
          }
          return true;
        });
  if (r.snapshots.back().t != t) snap(t, p, last_rate);
  r.t = t;
  r.final_rate = last_rate;
  r.final_pdf = make_cells(generator.grid, p);
  r.total_mass_drift = std::abs(cell_mass(r.final_pdf) - cell_mass(p0));
  if (r.min_density_ratio < -1e-6) r.warnings.push_back(undershoot_warning(r.min_density_ratio));
  return r;
}

SteadyState steady_state(const Generator& generator, const EvolveConfig& config, const GridPdf& p_init) {
  check_config(config);
  check_initial(p_init, generator);
  std::vector<double> p = p_init.values;
  double t = 0.0, max_drift = 0.0, min_ratio = 1.0, rate = 0.0;
  long long steps = 0;
  bool converged = false;
  int startup_left = config.startup_steps;
  march(generator, config, p, t, steps, max_drift, min_ratio, [&](double, const std::vector<double>&, double r) {
    rate = r;
    if (startup_left > 0) {
      --startup_left;
      return true;
    }
    converged = r < config.steady_tol;
    return !converged;
  });
  if (!converged) {
    throw NumericalError("steady_state: not stationary by t_end = " + std::to_string(config.t_end) +
                             " (||dP||_1/dt = " + std::to_string(rate) + ", tol " +
                             std::to_string(config.steady_tol) + ")",
                         rate);
  }
  SteadyState s;
  s.pdf = make_cells(generator.grid, std::move(p));
  s.residual = rate;
  s.t = t;
  s.steps = steps;
  s.total_mass_drift = std::abs(s.pdf.mass - cell_mass(p_init));
  if (min_ratio < -1e-6) s.warnings.push_back(undershoot_warning(min_ratio));
  return s;
}

}  // namespace tome
