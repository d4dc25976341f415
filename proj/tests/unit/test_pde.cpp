#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tome/errors.hpp"
#include "tome/master.hpp"
#include "tome/moments.hpp"
#include "tome/pde.hpp"

using namespace tome;

namespace {

const ModelParams kFig3a{0.4, 0.4, 1.0, 0.5};
// delta = 0.2, gamma tau = 1: tail exponent 26, negligible density at the walls.
const ModelParams kLight{1.0, 0.2, 1.0, 0.5};

DerivedScales scales_of(const ModelParams& p) {
  return derived_scales(Model::ornstein_uhlenbeck(p.gamma, p.epsilon, p.tau, p.d_f));
}

FluxCoefficients coeffs_of(const ModelParams& p) { return flux_coefficients(scales_of(p), p); }

double cell_moment(const GridPdf& p, int n) {
  double s = 0;
  for (int i = 0; i < p.size(); ++i) s += std::pow(p.x(i), n) * p.values[i] * p.grid.dx();
  return s;
}

// Mean of adjacent pairs: a 2n-cell PDF seen on the n-cell grid.
std::vector<double> coarsen(const std::vector<double>& v) {
  std::vector<double> c(v.size() / 2);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.5 * (v[2 * i] + v[2 * i + 1]);
  return c;
}

double l1(const std::vector<double>& a, const std::vector<double>& b, double h) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]) * h;
  return s;
}

SteadyState steady(const ModelParams& p, const FluxCoefficients& c, const UniformGrid& g) {
  EvolveConfig cfg;
  cfg.t_end = 3000;
  return steady_state(build_generator(c, g), cfg, gaussian_cells(g, p.d_f / p.gamma));
}

}  // namespace

TEST(BuildGenerator, ColumnsConserveMass) {
  const UniformGrid g = UniformGrid::symmetric(30.0, 1024);
  const Generator gen = build_generator(coeffs_of(kFig3a), g);
  EXPECT_EQ(gen.matrix.lower(), 2);
  EXPECT_EQ(gen.matrix.upper(), 2);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(1024), dp(1024);
  for (double& v : p) v = u(rng);
  gen.matrix.multiply(p, dp);
  double rate = 0, scale = 0;
  for (int i = 0; i < 1024; ++i) {
    rate += dp[i] * g.dx();
    scale += std::abs(dp[i]) * g.dx();
  }
  EXPECT_LT(std::abs(rate), 1e-13 * scale);
}

TEST(BuildGenerator, RejectsCoarseGrid) {
  EXPECT_THROW(build_generator(coeffs_of(kFig3a), UniformGrid::symmetric(30.0, 32)), std::invalid_argument);
}

TEST(BuildGenerator, OuStationaryVectorIsGaussian) {
  const ModelParams p{0.4, 0.0, 1.0, 0.5};
  std::vector<double> err;
  for (int n : {128, 256}) {
    const UniformGrid g = UniformGrid::symmetric(10.0, n);
    const SteadyState s = steady(p, coeffs_of(p), g);
    err.push_back(l1(s.pdf.values, gaussian_cells(g, 1.25).values, g.dx()));
  }
  EXPECT_LT(err[1], 1e-3);
  EXPECT_GT(err[0] / err[1], 3.0);
}

TEST(BuildGenerator, EquilibriumResidualConvergesAtSecondOrder) {
  const DerivedScales s = scales_of(kFig3a);
  const FluxCoefficients c = coeffs_of(kFig3a);
  std::vector<double> res;
  for (int n : {512, 1024, 2048}) {
    const UniformGrid g = UniformGrid::symmetric(30.0, n);
    const GridPdf eq = equilibrium_pdf_third(s, kFig3a, UniformGrid::symmetric(30.0, 8 * n)).pdf;
    const GridPdf cells = to_cells(eq, g);
    std::vector<double> r(static_cast<std::size_t>(n));
    build_generator(c, g).matrix.multiply(cells.values, r);
    double m = 0;
    for (double v : r) m = std::max(m, std::abs(v));
    res.push_back(m);
  }
  EXPECT_GT(res[0] / res[1], 3.0);
  EXPECT_GT(res[1] / res[2], 3.0);
}

TEST(Evolve, MassConservedOverManySteps) {
  const UniformGrid g = UniformGrid::symmetric(30.0, 128);
  EvolveConfig cfg;
  cfg.dt = 0.05;
  cfg.t_end = 5000.0;  // 10^5 steps
  const EvolveResult r = evolve(gaussian_cells(g, 1.0), build_generator(coeffs_of(kFig3a), g), cfg);
  EXPECT_GE(r.steps, 100000);
  EXPECT_LT(std::abs(cell_mass(r.final_pdf) - 1.0), 1e-10);
  EXPECT_LT(r.max_mass_drift_per_step, 1e-12);
}

TEST(Evolve, RejectsBadInput) {
  const UniformGrid g = UniformGrid::symmetric(30.0, 128);
  const Generator gen = build_generator(coeffs_of(kFig3a), g);
  GridPdf p = gaussian_cells(g, 1.0);
  EvolveConfig cfg;
  cfg.dt = 0.0;
  EXPECT_THROW(evolve(p, gen, cfg), std::invalid_argument);
  for (double& v : p.values) v *= 2;
  EXPECT_THROW(evolve(p, gen, EvolveConfig{}), std::invalid_argument);
  EXPECT_THROW(evolve(gaussian_cells(UniformGrid::symmetric(30.0, 256), 1.0), gen, EvolveConfig{}),
               std::invalid_argument);
}

TEST(Evolve, SnapshotsAtRequestedTimes) {
  const UniformGrid g = UniformGrid::symmetric(20.0, 256);
  EvolveConfig cfg;
  cfg.t_end = 10.0;
  cfg.snapshot_times = {1.0, 5.0, 10.0};
  const EvolveResult r = evolve(gaussian_cells(g, 1.0), build_generator(coeffs_of(kLight), g), cfg);
  ASSERT_EQ(r.snapshots.size(), 4u);
  EXPECT_EQ(r.snapshots[0].t, 0.0);
  EXPECT_NEAR(r.snapshots[1].t, 1.0, 1e-9);
  EXPECT_NEAR(r.snapshots[2].t, 5.0, 1e-9);
  EXPECT_NEAR(r.snapshots[3].t, 10.0, 1e-9);
}

TEST(Evolve, UnperturbedRelaxesToStationaryVariance) {
  const ModelParams p{0.4, 0.0, 1.0, 0.5};
  const UniformGrid g = UniformGrid::symmetric(15.0, 1024);
  EvolveConfig cfg;
  cfg.t_end = 10.0 / p.gamma;
  const EvolveResult r = evolve(gaussian_cells(g, 4.0), build_generator(coeffs_of(p), g), cfg);
  EXPECT_NEAR(cell_moment(r.final_pdf, 2) / 1.25, 1.0, 1e-3);
}

TEST(SteadyState, Figure3aMatchesClosedForm) {
  const DerivedScales s = scales_of(kFig3a);
  const UniformGrid g = UniformGrid::symmetric(30.0, 1024);
  const SteadyState third = steady(kFig3a, coeffs_of(kFig3a), g);
  const GridPdf ref = equilibrium_pdf_third(s, kFig3a, UniformGrid::symmetric(30.0, 8192)).pdf;
  EXPECT_LT(l1_distance(third.pdf, to_cells(ref, g)), 0.01);
  EXPECT_LT(third.residual, 1e-8);
  EXPECT_LT(std::abs(cell_mass(third.pdf) - 1.0), 1e-10);

  const SteadyState fick = steady(kFig3a, coeffs_of(kFig3a).without_third_order(), g);
  const GridPdf ref_fick = equilibrium_pdf_fick(s, kFig3a, UniformGrid::symmetric(30.0, 8192)).pdf;
  EXPECT_LT(l1_distance(fick.pdf, to_cells(ref_fick, g)), 0.01);
}

TEST(SteadyState, NonConvergenceIsReported) {
  const UniformGrid g = UniformGrid::symmetric(30.0, 128);
  EvolveConfig cfg;
  cfg.t_end = 1.0;
  try {
    steady_state(build_generator(coeffs_of(kFig3a), g), cfg, gaussian_cells(g, 1.0));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_GT(e.estimate(), 1e-8);
  }
}

TEST(PdeProperty, GridConvergenceIsSecondOrder) {
  const FluxCoefficients c = coeffs_of(kFig3a);
  std::vector<std::vector<double>> sol;
  for (int n : {256, 512, 1024}) sol.push_back(steady(kFig3a, c, UniformGrid::symmetric(30.0, n)).pdf.values);
  const double h0 = 60.0 / 256, h1 = 60.0 / 512;
  const double d0 = l1(sol[0], coarsen(sol[1]), h0);
  const double d1 = l1(sol[1], coarsen(sol[2]), h1);
  EXPECT_GE(d0 / d1, 3.0);
}

TEST(PdeProperty, SecondMomentFollowsMomentHierarchy) {
  struct Setup {
    ModelParams p;
    double x_max, t_mid;
  };
  // Fig. 3(a) tails reach the walls slowly; a wide domain keeps the truncated
  // moment equal to the full one during the early relaxation.
  for (const Setup& c : {Setup{kLight, 15.0, 1.0}, Setup{kFig3a, 150.0, 1.0}}) {
    const DerivedScales s = scales_of(c.p);
    const Eigen::MatrixXd m = moment_generator_matrix(2, s, c.p);
    const UniformGrid g = UniformGrid::symmetric(c.x_max, 4096);
    EvolveConfig cfg;
    cfg.dt = 0.01;
    cfg.t_end = c.t_mid + 0.2;
    cfg.snapshot_times = {c.t_mid - 0.1, c.t_mid, c.t_mid + 0.1};
    // Start narrow so the second moment is mid-relaxation.
    const EvolveResult r = evolve(gaussian_cells(g, 0.05), build_generator(coeffs_of(c.p), g), cfg);
    ASSERT_GE(r.snapshots.size(), 4u);
    const double lhs = (cell_moment(r.snapshots[3].pdf, 2) - cell_moment(r.snapshots[1].pdf, 2)) / 0.2;
    const double rhs =
        m(2, 2) * cell_moment(r.snapshots[2].pdf, 2) + m(2, 0) * cell_moment(r.snapshots[2].pdf, 0);
    EXPECT_NEAR(lhs / rhs, 1.0, 0.02) << c.p.gamma;
  }
}

TEST(PdeProperty, ThirdOrderTermNarrowsTheSteadyState) {
  const UniformGrid g = UniformGrid::symmetric(30.0, 512);
  for (const ModelParams& p : {kFig3a, kLight}) {
    const FluxCoefficients c = coeffs_of(p);
    const double third = cell_moment(steady(p, c, g).pdf, 2);
    const double fick = cell_moment(steady(p, c.without_third_order(), g).pdf, 2);
    EXPECT_LT(third, fick) << p.gamma;
  }
}
