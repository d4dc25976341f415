#include "tome/master.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tome/kummer.hpp"

namespace tome {
namespace {

void require_additive_noise(const ModelParams& params) {
  if (!(params.d_f > 0.0)) throw std::invalid_argument("equilibrium PDF requires d_f > 0");
}

// Fills node values from an even profile, mirroring so that P(-x) == P(x) bitwise.
template <typename Profile>
std::vector<double> even_nodes(const UniformGrid& grid, Profile&& profile) {
  const int n = grid.n_cells;
  std::vector<double> f(static_cast<std::size_t>(n + 1));
  for (int i = n; i >= n / 2; --i) {
    const double x = std::abs(grid.node(i));
    f[i] = profile(x);
    f[n - i] = f[i];
  }
  return f;
}

Equilibrium normalized(const std::vector<double>& f, const UniformGrid& grid, double alpha) {
  Normalized nz = normalize_on_grid(f, grid, alpha);
  Equilibrium eq;
  eq.pdf = std::move(nz.pdf);
  eq.norm_constant = nz.norm_constant;
  return eq;
}

// Coefficients of the 4th-order central first and second derivatives.
struct Derivs {
  double d1, d2;
};

Derivs central4(const std::vector<double>& p, int i, int step, double h) {
  const double m2 = p[i - 2 * step], m1 = p[i - step], c = p[i], p1 = p[i + step], p2 = p[i + 2 * step];
  return Derivs{(m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h),
                (-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) / (12.0 * h * h)};
}

}  // namespace

FluxCoefficients flux_coefficients(const DerivedScales& scales, const ModelParams& params) {
  const double d2 = scales.delta * scales.delta;
  FluxCoefficients c;
  c.a1 = (scales.gamma_tau + d2) / params.tau;
  c.d0 = params.d_f;
  c.d2 = d2 / params.tau;
  c.c1 = params.d_f * d2 * scales.theta / params.tau;
  return c;
}

UniformGrid default_grid(const DerivedScales& scales, const ModelParams& params, int n_cells) {
  const double core = 10.0 * std::sqrt(params.d_f / params.gamma);
  const double tail = 30.0 * std::sqrt(params.d_f * scales.theta);
  return UniformGrid::symmetric(std::max(core, tail), n_cells);
}

KummerProfile kummer_profile(const DerivedScales& scales, const ModelParams& params) {
  if (scales.delta == 0.0) throw std::invalid_argument("hypergeometric profile undefined for delta = 0");
  KummerProfile k;
  k.a = 0.5 * (1.0 / scales.moment_ratio() + 1.0);
  k.b = 0.5 * (1.0 / scales.big_r + 1.0);
  k.z_scale = 1.0 / (2.0 * params.d_f * scales.theta);
  return k;
}

double third_order_profile(const KummerProfile& profile, double x) {
  return kummer_1f1({profile.a, profile.b, -x * x * profile.z_scale});
}

Equilibrium gaussian_equilibrium(const ModelParams& params, const UniformGrid& grid) {
  require_additive_noise(params);
  const double k = params.gamma / (2.0 * params.d_f);
  return normalized(even_nodes(grid, [k](double x) { return std::exp(-k * x * x); }), grid,
                    std::numeric_limits<double>::infinity());
}

Equilibrium equilibrium_pdf_third(const DerivedScales& scales, const ModelParams& params,
                                  const UniformGrid& grid) {
  require_additive_noise(params);
  if (scales.delta == 0.0) return gaussian_equilibrium(params, grid);
  const KummerProfile profile = kummer_profile(scales, params);
  Equilibrium eq = normalized(
      even_nodes(grid, [&profile](double x) { return third_order_profile(profile, x); }), grid,
      scales.alpha_tail);
  if (!scales.weak_regime_ok) {
    eq.warnings.push_back("R >= 1: P2 would be integrable; truncation suspect");
  } else if (second_solution_integrable(scales)) {
    eq.warnings.push_back("R > 1/2: second solution x^(1-1/R) is integrable at the origin");
  }
  return eq;
}

Equilibrium equilibrium_pdf_fick(const DerivedScales& scales, const ModelParams& params,
                                 const UniformGrid& grid) {
  require_additive_noise(params);
  if (scales.delta == 0.0) return gaussian_equilibrium(params, grid);
  const double ratio = scales.delta * scales.delta / (params.tau * params.d_f);
  const double half_alpha = 0.5 * scales.alpha_tail;
  return normalized(
      even_nodes(grid, [=](double x) { return std::exp(-half_alpha * std::log1p(ratio * x * x)); }),
      grid, scales.alpha_tail);
}

FluxResidual flux_residual(const GridPdf& pdf, const FluxCoefficients& coeffs) {
  if (pdf.layout != GridLayout::Nodes) throw std::invalid_argument("flux_residual: node-sampled PDF required");
  const int n = pdf.size();
  if (n < 17) throw std::invalid_argument("flux_residual: grid too small");
  const double h = pdf.grid.dx();
  const auto& p = pdf.values;

  double max_j = 0.0, max_trunc = 0.0, scale = 0.0;
  for (int i = 4; i < n - 4; ++i) {
    const double x = pdf.x(i);
    const Derivs fine = central4(p, i, 1, h);
    const Derivs coarse = central4(p, i, 2, 2.0 * h);
    const double base = coeffs.a1 * x * p[i];
    const double diff = coeffs.d0 + coeffs.d2 * x * x;
    const double j_fine = base + diff * fine.d1 + coeffs.c1 * x * fine.d2;
    const double j_coarse = base + diff * coarse.d1 + coeffs.c1 * x * coarse.d2;
    const double j = (16.0 * j_fine - j_coarse) / 15.0;
    max_j = std::max(max_j, std::abs(j));
    max_trunc = std::max(max_trunc, std::abs(j_fine - j_coarse) / 15.0);
    scale = std::max(scale, std::abs(base));
  }
  FluxResidual out;
  if (scale == 0.0) throw std::invalid_argument("flux_residual: zero drift scale");
  out.residual = max_j / scale;
  out.truncation_estimate = max_trunc / scale;
  // The stencil error swamps the residual and is too large to certify the 1e-6 level.
  out.inconclusive = out.truncation_estimate > 1e-6 && out.truncation_estimate >= 0.1 * out.residual;
  return out;
}

bool second_solution_integrable(const DerivedScales& scales) { return scales.big_r > 0.5; }

}  // namespace tome
