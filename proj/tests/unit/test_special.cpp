#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "tome/errors.hpp"
#include "tome/grid.hpp"
#include "tome/kummer.hpp"
#include "tome/master.hpp"
#include "tome/model.hpp"

using namespace tome;

namespace {

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

std::vector<double> sample(const UniformGrid& g, double (*f)(double)) {
  std::vector<double> v;
  for (int i = 0; i <= g.n_cells; ++i) v.push_back(f(g.node(i)));
  return v;
}

}  // namespace

TEST(Kummer, ZeroArgumentIsOne) {
  EXPECT_EQ(kummer_1f1({1.75, 3.3125, 0.0}), 1.0);
  EXPECT_EQ(kummer_1f1({40.0, 0.5, 0.0}), 1.0);
}

TEST(Kummer, EqualParametersGiveExponential) {
  EXPECT_NEAR(kummer_1f1({1.0, 1.0, -2.0}), std::exp(-2.0), 1e-14 * std::exp(-2.0));
  for (double a : {0.3, 1.0, 17.5, 100.0}) {
    for (double z : {-50.0, -3.0, 0.7, 60.0}) {
      EXPECT_LE(rel_err(kummer_1f1({a, a, z}), std::exp(z)), 1e-14) << a << ' ' << z;
    }
  }
}

TEST(Kummer, Figure3aArgumentMatchesOracle) {
  const double want = oracle::hyp1f1(1.75, 3.3125, -0.9);
  EXPECT_LE(rel_err(kummer_1f1({1.75, 3.3125, -0.9}), want), 1e-12);
}

TEST(Kummer, PolesOfBAreRejected) {
  EXPECT_THROW(kummer_1f1({1.0, 0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(kummer_1f1({1.0, -3.0, 1.0}), std::invalid_argument);
  EXPECT_NO_THROW(kummer_1f1({1.0, -2.5, 0.5}));
}

TEST(Kummer, CrossoverIsDocumented) {
  EXPECT_DOUBLE_EQ(kummer_asymptotic_crossover(1.75, 3.3125), 30.0 + 1.75 + 3.3125);
}

TEST(Kummer, LargeNegativeArgumentsMatchOracle) {
  for (double z : {-100.0, -1234.5, -1e4}) {
    for (auto [a, b] : {std::pair{1.75, 3.3125}, {0.5, 80.0}, {60.0, 2.0}}) {
      // 1F1(60; 2; z) ~ e^z z^58 underflows double for z <= -1234.5.
      if (oracle::hyp1f1_log10(a, b, z) < -290) continue;
      const double want = oracle::hyp1f1(a, b, z);
      EXPECT_LE(rel_err(kummer_1f1({a, b, z}), want), 1e-10) << a << ' ' << b << ' ' << z;
    }
  }
}

TEST(Kummer, RandomPointsMatchOracle) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ab(0.01, 100.0), logz(-3.0, 3.0), pos(0.0, 100.0);
  int checked = 0;
  while (checked < 150) {
    const double a = ab(rng), b = ab(rng);
    const double z = checked % 5 == 0 ? pos(rng) : -std::pow(10.0, logz(rng));
    if (oracle::hyp1f1_log10(a, b, z) < -290) continue;
    const double want = oracle::hyp1f1(a, b, z);
    const double got = kummer_1f1({a, b, z});
    EXPECT_LE(rel_err(got, want), 1e-10) << a << ' ' << b << ' ' << z;
    ++checked;
  }
}

TEST(KummerProperty, TransformedMatchesDirectSeries) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ab(0.05, 30.0), zd(-60.0, -0.01);
  for (int i = 0; i < 100; ++i) {
    const double a = ab(rng), b = ab(rng), z = zd(rng);
    const KummerEvaluation e = kummer_1f1_evaluate({a, b, z});
    const double direct = oracle::hyp1f1(a, b, z);
    if (std::abs(direct) < 1e-290) continue;
    EXPECT_LE(rel_err(e.value, direct), 1e-9) << a << ' ' << b << ' ' << z;
  }
}

TEST(KummerProperty, ContiguityRecurrence) {
  // 1F1(a; b; z) = 1F1(a-1; b; z) + (z/b) 1F1(a; b+1; z)
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> ad(1.01, 50.0), bd(0.2, 50.0), zd(-200.0, 50.0);
  for (int i = 0; i < 200; ++i) {
    const double a = ad(rng), b = bd(rng), z = zd(rng);
    const double lhs = kummer_1f1({a, b, z});
    const double rhs = kummer_1f1({a - 1, b, z}) + z / b * kummer_1f1({a, b + 1, z});
    const double scale = std::abs(lhs) + std::abs(kummer_1f1({a - 1, b, z}));
    if (scale < 1e-290) continue;
    EXPECT_LE(std::abs(lhs - rhs) / scale, 1e-8) << a << ' ' << b << ' ' << z;
  }
}

TEST(KummerProperty, ErrorEstimateIsReported) {
  const KummerEvaluation e = kummer_1f1_evaluate({1.75, 3.3125, -500.0});
  EXPECT_LT(e.relative_error, 1e-10);
  EXPECT_GT(e.terms, 0);
}

TEST(NormalizeOnGrid, StandardGaussianNeedsNoNormalization) {
  const UniformGrid g = UniformGrid::symmetric(8.0, 1600);
  const auto f = sample(g, [](double x) { return std::exp(-x * x / 2) / std::sqrt(2 * M_PI); });
  const Normalized n = normalize_on_grid(f, g, std::numeric_limits<double>::infinity());
  EXPECT_NEAR(n.norm_constant, 1.0, 1e-10);
  EXPECT_NEAR(total_mass(n.pdf), 1.0, 1e-10);
}

TEST(NormalizeOnGrid, RectangleArea) {
  const UniformGrid g = UniformGrid::symmetric(1.0, 100);
  const std::vector<double> f(101, 2.0);
  EXPECT_NEAR(normalize_on_grid(f, g, std::numeric_limits<double>::infinity()).norm_constant, 4.0, 1e-14);
}

TEST(NormalizeOnGrid, KummerProfileMatchesAdaptiveQuadrature) {
  const ModelParams p{0.4, 0.4, 1.0, 0.5};
  const DerivedScales s = derived_scales(Model::ornstein_uhlenbeck(0.4, 0.4, 1.0, 0.5));
  const KummerProfile kp = kummer_profile(s, p);
  const UniformGrid g = default_grid(s, p);
  std::vector<double> f;
  for (int i = 0; i <= g.n_cells; ++i) f.push_back(third_order_profile(kp, g.node(i)));
  const Normalized n = normalize_on_grid(f, g, s.alpha_tail);
  const double ref = 2.0 * oracle::integrate_to_infinity([&](double x) { return third_order_profile(kp, x); }, 0.0, 1e-12);
  EXPECT_NEAR(n.norm_constant / ref, 1.0, 1e-8);
}

TEST(NormalizeOnGrid, RejectsBadInput) {
  const UniformGrid g = UniformGrid::symmetric(1.0, 10);
  std::vector<double> f(11, 1.0);
  EXPECT_THROW(normalize_on_grid(f, g, 1.0), std::invalid_argument);
  f[3] = -1e-10;
  EXPECT_THROW(normalize_on_grid(f, g, 3.0), std::invalid_argument);
  f[3] = -1e-14;
  EXPECT_NO_THROW(normalize_on_grid(f, g, std::numeric_limits<double>::infinity()));
  const UniformGrid odd = UniformGrid::symmetric(1.0, 11);
  EXPECT_THROW(normalize_on_grid(std::vector<double>(12, 1.0), odd, 3.0), std::invalid_argument);
}

TEST(Grid, MomentsDistancesAndInterpolation) {
  const UniformGrid g = UniformGrid::symmetric(12.0, 2400);
  const auto f = sample(g, [](double x) { return std::exp(-x * x / 2) / std::sqrt(2 * M_PI); });
  const GridPdf p = normalize_on_grid(f, g, std::numeric_limits<double>::infinity()).pdf;
  EXPECT_NEAR(grid_moment(p, 2), 1.0, 1e-10);
  EXPECT_NEAR(grid_moment(p, 4), 3.0, 1e-9);
  EXPECT_NEAR(l1_distance(p, p), 0.0, 0.0);
  EXPECT_NEAR(interpolate(p, 0.0), 1 / std::sqrt(2 * M_PI), 1e-15);
  EXPECT_EQ(interpolate(p, 13.0), 0.0);
  GridPdf q = p;
  for (double& v : q.values) v *= 1.5;
  EXPECT_NEAR(l1_distance(p, q), 0.5, 1e-6);
}

TEST(Grid, PowerTailMomentDiverges) {
  const UniformGrid g = UniformGrid::symmetric(50.0, 2000);
  const auto f = sample(g, [](double x) { return std::pow(1 + x * x, -1.75); });
  const GridPdf p = normalize_on_grid(f, g, 3.5).pdf;
  EXPECT_TRUE(std::isfinite(grid_moment(p, 2)));
  EXPECT_TRUE(std::isinf(grid_moment(p, 3)));
  // integral (1+x^2)^{-7/4} dx = sqrt(pi) Gamma(5/4) / Gamma(7/4)
  const double norm = std::sqrt(M_PI) * std::tgamma(1.25) / std::tgamma(1.75);
  EXPECT_NEAR(normalize_on_grid(f, g, 3.5).norm_constant / norm, 1.0, 1e-8);
}

TEST(Grid, CsvIsStable) {
  const UniformGrid g = UniformGrid::symmetric(1.0, 2);
  GridPdf p;
  p.grid = g;
  p.values = {0.25, 0.5, 0.25};
  std::ostringstream a, b;
  write_csv(a, p, {{"k", "v"}});
  write_csv(b, p, {{"k", "v"}});
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, 14), "# k=v\nx,densit");
  EXPECT_EQ(format_number(0.1), "1.000000000000e-01");
}
