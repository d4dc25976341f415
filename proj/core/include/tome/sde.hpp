#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tome/grid.hpp"
#include "tome/model.hpp"

namespace tome {

enum class Scheme { HeunStratonovich };

/// Largest admissible step, 0.05 min(tau, 1/gamma, 1/(gamma + 4 epsilon)).
double max_stable_dt(const ModelParams& params);
/// Smallest admissible burn-in, 10 max(tau, 1/gamma).
double min_burn_in(const ModelParams& params);

struct SimConfig {
  double dt = 0.01;
  double t_burn = 10.0;
  double t_end = 110.0;          // samples are recorded on (t_burn, t_end]
  long long n_traj = 1000;
  std::uint64_t seed = 1;
  Scheme scheme = Scheme::HeunStratonovich;
  int stride = 100;              // steps between recorded samples
  int threads = 0;               // 0: hardware concurrency
  int hist_bins = 201;
  double hist_lo = -10.0;
  double hist_hi = 10.0;
  double exceed_threshold = 5.0; // for the fraction of samples with |x| above it
  int refinement = 0;            // each step split into 2^refinement substeps on the same noise path

  long long samples_per_trajectory() const;
  long long burn_steps() const;

  /// Step and burn-in guards plus basic sanity; throws std::invalid_argument.
  void validate(const ModelParams& params) const;

  /// Defaults for a stationary ensemble of about total_samples samples:
  /// dt at the stability guard, burn-in covering the slowest moment
  /// relaxation, samples every half of max(tau, 1/gamma), histogram over
  /// +-5 standard deviations of the unperturbed law scaled by the moment ratio.
  static SimConfig defaults(const ModelParams& params, const DerivedScales& scales,
                            long long total_samples, std::uint64_t seed);
};

/// Exact transition of the unit-variance OU process over dt.
double ou_step(double xi, double dt, double eta, double tau);

struct Trajectory {
  std::vector<double> t;
  std::vector<double> x;
  bool divergent = false;
};

/// One path of dx = -(gamma + epsilon xi) x dt + sqrt(2 d_f) dW with OU xi,
/// Heun for the colored term. Starts at x0 when given, otherwise from the
/// unperturbed Gaussian; xi starts from its stationary law. Records every
/// stride steps after t_burn. Randomness comes from stream `stream_id` of
/// config.seed.
Trajectory integrate_trajectory(const ModelParams& params, const SimConfig& config,
                                std::uint64_t stream_id, std::optional<double> x0 = std::nullopt);

struct Histogram {
  std::vector<double> edges;
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;  // all samples, including those outside the edges

  int bins() const { return static_cast<int>(counts.size()); }
  double center(int i) const { return 0.5 * (edges[i] + edges[i + 1]); }
  double width(int i) const { return edges[i + 1] - edges[i]; }
  double density(int i) const {
    return total == 0 ? 0.0 : static_cast<double>(counts[i]) / (static_cast<double>(total) * width(i));
  }

  static Histogram uniform(double lo, double hi, int bins);
  static Histogram log_spaced(double lo, double hi, int bins);
  void add(double x);
};

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

struct RunningMoment {
  std::uint64_t samples = 0;
  double value = 0.0;
};

struct EnsembleStats {
  Histogram histogram;
  Histogram abs_histogram;            // log-spaced bins of |x|
  std::array<Estimate, 4> moments{};  // <x>, <x^2>, <x^3>, <x^4>
  Estimate negative_fraction;         // fraction of samples with x < 0
  Estimate exceed_fraction;           // fraction with |x| > config.exceed_threshold
  std::uint64_t samples = 0;
  long long trajectories = 0;         // trajectories that contributed
  long long divergent = 0;
  /// <x^2> over the first m samples of every trajectory, m = 10, 100, ...
  std::vector<RunningMoment> running_second_moment;
  SimConfig config;

  const Estimate& moment(int n) const { return moments.at(static_cast<std::size_t>(n - 1)); }
};

/// Runs config.n_traj independent trajectories on config.threads workers.
/// Trajectory i draws from stream i, accumulators are merged in index order,
/// so the result is bit-identical for any thread count. Throws NumericalError
/// when more than 0.1% of the trajectories diverge (|x| > 1e300).
EnsembleStats ensemble_stats(const Model& model, const SimConfig& config);

/// L1 distance sum |h_i - pbar_i| width_i between histogram densities and the
/// bin averages of a grid PDF (linear interpolation, zero outside the grid).
double histogram_l1(const Histogram& histogram, const GridPdf& pdf);

enum class RelaxationEstimator {
  /// Ensemble average of x^2 from full Heun trajectories.
  Direct,
  /// E[x^2 | xi path] integrated exactly along each xi path, with xi drawn
  /// under a mean shift of -4 epsilon tau and reweighted by its likelihood
  /// ratio. Same expectation; bounded variance when <x^4> diverges.
  ConditionalTilted,
};

struct RelaxationConfig {
  double x0 = 3.0;
  double dt = 0.01;
  double t_end = 30.0;
  double sample_interval = 0.5;
  long long n_traj = 20000;
  std::uint64_t seed = 1;
  int threads = 0;
  RelaxationEstimator estimator = RelaxationEstimator::Direct;
};

struct RelaxationCurve {
  std::vector<double> t;
  std::vector<double> mean;  // ensemble <x^2>(t)
  std::vector<double> se;
};

/// <x^2>(t) of an ensemble started at x0 with stationary xi; deterministic for
/// any thread count.
RelaxationCurve relaxation_second_moment(const Model& model, const RelaxationConfig& config);

/// JSON document with moments, standard errors, counts and the config.
std::string ensemble_stats_json(const EnsembleStats& stats);

/// `bin_center,density` CSV preceded by `# key=value` header lines.
void write_histogram_csv(std::ostream& out, const Histogram& histogram,
                         const std::vector<std::pair<std::string, std::string>>& header);

}  // namespace tome
