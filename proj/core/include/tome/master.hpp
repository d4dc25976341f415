#pragma once

#include <string>
#include <vector>

#include "tome/grid.hpp"
#include "tome/model.hpp"

namespace tome {

/// Coefficients of the equilibrium current
///   J(x) = a1 x P + (d0 + d2 x^2) P' + c1 x P''.
struct FluxCoefficients {
  double a1 = 0.0;  // (gamma tau + delta^2) / tau
  double d0 = 0.0;  // d_f
  double d2 = 0.0;  // delta^2 / tau
  double c1 = 0.0;  // d_f delta^2 theta / tau, the non-Fick term

  /// Same coefficients with the third-order term removed (Fokker-Planck variant).
  FluxCoefficients without_third_order() const {
    FluxCoefficients c = *this;
    c.c1 = 0.0;
    return c;
  }
};

FluxCoefficients flux_coefficients(const DerivedScales& scales, const ModelParams& params);

/// Symmetric grid with x_max = max(10 sqrt(d_f/gamma), 30 sqrt(d_f theta)).
UniformGrid default_grid(const DerivedScales& scales, const ModelParams& params, int n_cells = 4096);

struct Equilibrium {
  GridPdf pdf;
  double norm_constant = 1.0;
  std::vector<std::string> warnings;
};

/// Parameters of the hypergeometric profile 1F1(a; b; -x^2 z_scale).
struct KummerProfile {
  double a = 0.0;        // (gamma tau / delta^2 + 1) / 2
  double b = 0.0;        // (1 / R + 1) / 2
  double z_scale = 0.0;  // 1 / (2 d_f theta)
};

KummerProfile kummer_profile(const DerivedScales& scales, const ModelParams& params);

/// Unnormalized hypergeometric profile at x (1 at the origin).
double third_order_profile(const KummerProfile& profile, double x);

/// Zero-current solution of the third-order equation, normalized on the grid
/// with the power-law tail |x|^-alpha. delta = 0 gives the exact Gaussian of
/// variance d_f/gamma. Throws std::invalid_argument for d_f <= 0.
Equilibrium equilibrium_pdf_third(const DerivedScales& scales, const ModelParams& params,
                                  const UniformGrid& grid);

/// Zero Fick-current solution (d_f + d2 x^2)^(-alpha/2), same tail and
/// degenerate Gaussian branch.
Equilibrium equilibrium_pdf_fick(const DerivedScales& scales, const ModelParams& params,
                                 const UniformGrid& grid);

/// Exact Gaussian of variance d_f/gamma.
Equilibrium gaussian_equilibrium(const ModelParams& params, const UniformGrid& grid);

struct FluxResidual {
  double residual = 0.0;              // max|J| / max(a1 |x| P) over the interior
  double truncation_estimate = 0.0;   // same normalization, for the 4th-order stencils
  bool inconclusive = false;          // truncation too large to certify or refute
};

/// Evaluates J with 4th-order central differences at spacings h and 2h; the
/// reported residual uses the Richardson combination of the two, the
/// truncation estimate is |J_h - J_2h| / 15. Requires a node-sampled PDF.
FluxResidual flux_residual(const GridPdf& pdf, const FluxCoefficients& coeffs);

/// Whether the rejected second solution x^(1 - 1/R) is integrable at the
/// origin, which holds exactly when R > 1/2.
bool second_solution_integrable(const DerivedScales& scales);

}  // namespace tome
