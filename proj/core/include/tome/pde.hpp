#pragma once

#include <string>
#include <vector>

#include "tome/banded.hpp"
#include "tome/grid.hpp"
#include "tome/master.hpp"

namespace tome {

/// Finite-volume generator dP/dt = A P of dP/dt = dJ/dx on cell averages,
/// with J = 0 at both walls.
struct Generator {
  UniformGrid grid;
  FluxCoefficients coeffs;
  BandMatrix matrix{1, 0, 0};
};

/// Face fluxes: drift by linear upwind interpolation, diffusion by central
/// differences, c1 x P'' by the 4-point centered second difference (3-point
/// next to the walls). Pentadiagonal. Throws NumericalError when a column sum
/// exceeds 1e-13 relative to the column scale.
Generator build_generator(const FluxCoefficients& coeffs, const UniformGrid& grid);

enum class TimeScheme { CrankNicolsonBanded };

struct EvolveConfig {
  double dt = 0.05;
  double t_end = 100.0;
  TimeScheme scheme = TimeScheme::CrankNicolsonBanded;
  double steady_tol = 1e-8;            // on ||P(t+dt) - P(t)||_1 / dt
  std::vector<double> snapshot_times;  // recorded by evolve
  int startup_steps = 4;               // backward Euler half steps damping stiff modes
};

struct Snapshot {
  double t = 0.0;
  GridPdf pdf;
  double mass = 0.0;
  double min_density = 0.0;
  double rate = 0.0;  // ||P(t) - P(t - dt)||_1 / dt
};

struct EvolveResult {
  std::vector<Snapshot> snapshots;
  GridPdf final_pdf;
  double t = 0.0;
  long long steps = 0;
  double max_mass_drift_per_step = 0.0;
  double total_mass_drift = 0.0;
  double min_density_ratio = 0.0;  // min P / max P over the run
  double final_rate = 0.0;
  std::vector<std::string> warnings;
};

/// Cell-averaged starting profile: a Gaussian of the given variance, normalized
/// to unit discrete mass.
GridPdf gaussian_cells(const UniformGrid& grid, double variance);

/// Crank-Nicolson with banded LU solves. Snapshots at the requested times
/// (rounded to the step grid) plus t = 0 and the final state.
EvolveResult evolve(const GridPdf& p0, const Generator& generator, const EvolveConfig& config);

struct SteadyState {
  GridPdf pdf;
  double residual = 0.0;  // achieved ||dP||_1 / dt
  double t = 0.0;
  long long steps = 0;
  double total_mass_drift = 0.0;
  std::vector<std::string> warnings;
};

/// Steps until ||P(t+dt) - P(t)||_1 / dt < steady_tol; throws NumericalError
/// with the achieved rate if t_end is reached first.
SteadyState steady_state(const Generator& generator, const EvolveConfig& config, const GridPdf& p_init);

/// Discrete mass sum P_i dx of a cell PDF.
double cell_mass(const GridPdf& pdf);

/// Samples a node PDF at the cell centers of `grid`.
GridPdf to_cells(const GridPdf& pdf, const UniformGrid& grid);

}  // namespace tome
