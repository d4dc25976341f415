#include <benchmark/benchmark.h>

#include "tome/kummer.hpp"
#include "tome/master.hpp"
#include "tome/model.hpp"
#include "tome/ndim.hpp"
#include "tome/pde.hpp"
#include "tome/sde.hpp"

using namespace tome;

namespace {

const ModelParams kFig3a{0.4, 0.4, 1.0, 0.5};

Model fig3a() { return Model::ornstein_uhlenbeck(kFig3a.gamma, kFig3a.epsilon, kFig3a.tau, kFig3a.d_f); }

void BM_KummerSeries(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(kummer_1f1({1.75, 3.3125, -0.9}));
}
BENCHMARK(BM_KummerSeries);

void BM_KummerAsymptotic(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(kummer_1f1({1.75, 3.3125, -1234.5}));
}
BENCHMARK(BM_KummerAsymptotic);

void BM_EquilibriumThird(benchmark::State& state) {
  const DerivedScales s = derived_scales(fig3a());
  const UniformGrid g = default_grid(s, kFig3a, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(equilibrium_pdf_third(s, kFig3a, g));
}
BENCHMARK(BM_EquilibriumThird)->Arg(1024)->Arg(8192);

void BM_EnsembleSamples(benchmark::State& state) {
  const Model m = fig3a();
  SimConfig c = SimConfig::defaults(kFig3a, derived_scales(m), state.range(0), 1);
  c.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(ensemble_stats(m, c));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EnsembleSamples)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_PdeSteadyState(benchmark::State& state) {
  const DerivedScales s = derived_scales(fig3a());
  const UniformGrid g = UniformGrid::symmetric(30.0, static_cast<int>(state.range(0)));
  const Generator gen = build_generator(flux_coefficients(s, kFig3a), g);
  const GridPdf p0 = gaussian_cells(g, kFig3a.d_f / kFig3a.gamma);
  EvolveConfig cfg;
  cfg.dt = 0.05;
  cfg.t_end = 2000.0;
  cfg.steady_tol = 1e-8;
  for (auto _ : state) benchmark::DoNotOptimize(steady_state(gen, cfg, p0));
}
BENCHMARK(BM_PdeSteadyState)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);

void BM_NdCoefficients(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  NdModel m;
  m.E = Eigen::MatrixXd::Identity(n, n) * 0.5;
  for (int i = 0; i + 1 < n; ++i) m.E(i, i + 1) = 0.1;
  m.D = Eigen::MatrixXd::Identity(n, n) * 0.5;
  m.G = Eigen::MatrixXd::Identity(n, n);
  m.epsilon = 0.3;
  m.kernel = CorrelationKernel::ornstein_uhlenbeck(0.2);
  for (auto _ : state) benchmark::DoNotOptimize(nd_coefficients(m));
}
BENCHMARK(BM_NdCoefficients)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
