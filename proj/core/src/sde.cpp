#include "tome/sde.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "tome/errors.hpp"
#include "tome/rng.hpp"

namespace tome {
namespace {

constexpr double kDivergence = 1e300;

int resolve_threads(int requested, long long work) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  n = std::max(n, 1);
  return static_cast<int>(std::min<long long>(n, std::max<long long>(work, 1)));
}

// Runs body(i) for i in [0, n) on `threads` workers pulling indices from a
// shared counter, then rethrows the first exception.
template <typename Body>
void parallel_for(long long n, int threads, Body&& body) {
  std::atomic<long long> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&](int worker_id) {
    try {
      for (long long i = next++; i < n && !failed; i = next++) body(i, worker_id);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
      failed = true;
    }
  };
  if (threads <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

// Heun integrator for the colored multiplicative term with exact OU noise.
// With refinement L each step of dt is taken as 2^L substeps whose draws are
// split from the unrefined ones, so runs at different L share their paths.
class Stepper {
 public:
  Stepper(const ModelParams& p, double dt, std::uint64_t seed, std::uint64_t stream, int refinement = 0)
      : gamma_(p.gamma), eps_(p.epsilon), tau_(p.tau), dt_(dt), rng_(seed, stream),
        aux_(seed, stream | kAuxStream), substeps_(1 << refinement) {
    h_ = dt / substeps_;
    decay_ = std::exp(-h_ / p.tau);
    kick_ = std::sqrt(-std::expm1(-2.0 * h_ / p.tau));
    additive_ = std::sqrt(2.0 * p.d_f * h_);
    spread_ = p.d_f > 0.0 ? std::sqrt(p.d_f / p.gamma) : 0.0;
    eta_xi_.resize(static_cast<std::size_t>(substeps_));
    eta_w_.resize(static_cast<std::size_t>(substeps_));
  }

  void start(std::optional<double> x0) {
    xi = rng_.normal();
    const double z = rng_.normal();
    x = x0 ? *x0 : spread_ * z;
  }

  void step() {
    eta_xi_[0] = rng_.normal();
    eta_w_[0] = rng_.normal();
    if (substeps_ > 1) {
      split_ou(0, substeps_, dt_);
      split_additive(0, substeps_);
    }
    for (int k = 0; k < substeps_; ++k) substep(eta_xi_[k], eta_w_[k]);
  }

  double x = 0.0;
  double xi = 0.0;

 private:
  static constexpr std::uint64_t kAuxStream = std::uint64_t{1} << 63;

  void substep(double eta_xi, double eta_w) {
    const double xi_next = xi * decay_ + kick_ * eta_xi;
    const double dw = additive_ * eta_w;
    const double k0 = -(gamma_ + eps_ * xi);
    const double k1 = -(gamma_ + eps_ * xi_next);
    const double predictor = x + k0 * x * h_;
    x += 0.5 * (k0 * x + k1 * (predictor + dw)) * h_ + dw;
    xi = xi_next;
  }

  // Draw eta_xi_[lo] drives the OU transition over `span`; replaces it by two
  // draws for the halves whose composition reproduces it exactly.
  void split_ou(int lo, int n, double span) {
    if (n == 1) return;
    const double b = std::exp(-0.5 * span / tau_);
    const double eta = eta_xi_[lo], zeta = aux_.normal();
    const double norm = std::sqrt(1.0 + b * b);
    eta_xi_[lo] = (b * eta + zeta) / norm;
    eta_xi_[lo + n / 2] = (eta - b * zeta) / norm;
    split_ou(lo, n / 2, 0.5 * span);
    split_ou(lo + n / 2, n / 2, 0.5 * span);
  }

  void split_additive(int lo, int n) {
    if (n == 1) return;
    const double eta = eta_w_[lo], zeta = aux_.normal();
    eta_w_[lo] = (eta + zeta) / std::sqrt(2.0);
    eta_w_[lo + n / 2] = (eta - zeta) / std::sqrt(2.0);
    split_additive(lo, n / 2);
    split_additive(lo + n / 2, n / 2);
  }

  double gamma_, eps_, tau_, dt_;
  double h_ = 0.0, decay_ = 0.0, kick_ = 0.0, additive_ = 0.0, spread_ = 0.0;
  NormalStream rng_;
  NormalStream aux_;
  int substeps_;
  std::vector<double> eta_xi_, eta_w_;
};

void require_ou(const Model& model) {
  if (model.kernel.kind() != CorrelationKernel::Kind::OrnsteinUhlenbeck) {
    throw std::invalid_argument("Monte Carlo requires an Ornstein-Uhlenbeck kernel");
  }
}

struct TrajectoryAccumulator {
  std::array<double, 4> sums{};
  double negative = 0.0;
  double exceed = 0.0;
  std::vector<double> prefix_x2;  // sum of x^2 over the first checkpoint[k] samples
  bool divergent = false;
};

std::vector<long long> checkpoints(long long per_traj) {
  std::vector<long long> c;
  for (long long m = 10; m < per_traj; m *= 10) c.push_back(m);
  c.push_back(per_traj);
  return c;
}

}  // namespace

double max_stable_dt(const ModelParams& p) {
  return 0.05 * std::min({p.tau, 1.0 / p.gamma, 1.0 / (p.gamma + 4.0 * p.epsilon)});
}

double min_burn_in(const ModelParams& p) { return 10.0 * std::max(p.tau, 1.0 / p.gamma); }

long long SimConfig::samples_per_trajectory() const {
  const double span = (t_end - t_burn) / (stride * dt);
  return static_cast<long long>(std::floor(span * (1.0 + 1e-12)));
}

long long SimConfig::burn_steps() const { return static_cast<long long>(std::ceil(t_burn / dt * (1.0 - 1e-12))); }

void SimConfig::validate(const ModelParams& params) const {
  params.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("simulation: dt must be > 0");
  const double dt_max = max_stable_dt(params);
  if (dt > dt_max * (1.0 + 1e-12)) {
    throw std::invalid_argument("simulation: dt = " + std::to_string(dt) + " exceeds the stability guard " +
                                std::to_string(dt_max));
  }
  const double burn = min_burn_in(params);
  if (t_burn < burn * (1.0 - 1e-12)) {
    throw std::invalid_argument("simulation: t_burn = " + std::to_string(t_burn) + " is below " +
                                std::to_string(burn));
  }
  if (stride < 1) throw std::invalid_argument("simulation: stride must be >= 1");
  if (refinement < 0 || refinement > 16) throw std::invalid_argument("simulation: refinement must be in [0, 16]");
  if (n_traj < 1) throw std::invalid_argument("simulation: n_traj must be >= 1");
  if (samples_per_trajectory() < 1) throw std::invalid_argument("simulation: t_end leaves no samples after burn-in");
  if (hist_bins < 1 || !(hist_lo < hist_hi)) throw std::invalid_argument("simulation: bad histogram range");
}

SimConfig SimConfig::defaults(const ModelParams& params, const DerivedScales& scales,
                              long long total_samples, std::uint64_t seed) {
  SimConfig c;
  c.seed = seed;
  c.dt = max_stable_dt(params);
  const double slow = std::max(params.tau, 1.0 / params.gamma);
  double burn = min_burn_in(params);
  const double q = scales.moment_ratio();
  // Slowest relevant relaxation: second moment if it exists, else the first.
  const double rate = 1.0 - 2.0 * q > 0.0 ? 2.0 * params.gamma * (1.0 - 2.0 * q)
                                           : params.gamma * (1.0 - q);
  if (rate > 0.0) burn = std::max(burn, std::min(5.0 / rate, 200.0 * slow));
  c.t_burn = burn;
  c.stride = std::max(1, static_cast<int>(std::lround(0.5 * slow / c.dt)));
  c.n_traj = std::min<long long>(1000, std::max<long long>(1, total_samples / 100));
  const long long per_traj = std::max<long long>(1, (total_samples + c.n_traj - 1) / c.n_traj);
  c.t_end = c.t_burn + static_cast<double>(per_traj) * c.stride * c.dt;

  double var = params.d_f / params.gamma;
  if (1.0 - 2.0 * q > 0.0) var *= (1.0 - 2.0 * scales.big_r) / (1.0 - 2.0 * q);
  const double half = var > 0.0 ? 5.0 * std::sqrt(var) : 5.0;
  c.hist_lo = -half;
  c.hist_hi = half;
  return c;
}

double ou_step(double xi, double dt, double eta, double tau) {
  if (!(dt > 0.0) || !(tau > 0.0)) throw std::invalid_argument("ou_step: dt and tau must be > 0");
  return xi * std::exp(-dt / tau) + std::sqrt(-std::expm1(-2.0 * dt / tau)) * eta;
}

Trajectory integrate_trajectory(const ModelParams& params, const SimConfig& config,
                                std::uint64_t stream_id, std::optional<double> x0) {
  params.validate();
  if (!(config.dt > 0.0) || config.stride < 1 || config.t_burn < 0.0 || !(config.t_end >= config.t_burn)) {
    throw std::invalid_argument("integrate_trajectory: invalid time stepping");
  }
  Stepper s(params, config.dt, config.seed, stream_id, config.refinement);
  s.start(x0);
  Trajectory out;
  const long long burn = config.t_burn > 0.0 ? config.burn_steps() : 0;
  const long long n = config.samples_per_trajectory();
  for (long long i = 0; i < burn; ++i) s.step();
  if (burn == 0) {
    out.t.push_back(0.0);
    out.x.push_back(s.x);
  }
  for (long long k = 0; k < n; ++k) {
    for (int j = 0; j < config.stride; ++j) s.step();
    if (!(std::abs(s.x) <= kDivergence)) {
      out.divergent = true;
      break;
    }
    out.t.push_back((burn + (k + 1) * config.stride) * config.dt);
    out.x.push_back(s.x);
  }
  return out;
}

Histogram Histogram::uniform(double lo, double hi, int bins) {
  Histogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) h.edges[i] = lo + (hi - lo) * i / bins;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  return h;
}

Histogram Histogram::log_spaced(double lo, double hi, int bins) {
  Histogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i <= bins; ++i) h.edges[i] = std::exp(a + (b - a) * i / bins);
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  return h;
}

void Histogram::add(double x) {
  ++total;
  if (!(x >= edges.front()) || !(x < edges.back())) return;
  auto it = std::upper_bound(edges.begin(), edges.end(), x);
  ++counts[static_cast<std::size_t>(it - edges.begin()) - 1];
}

EnsembleStats ensemble_stats(const Model& model, const SimConfig& config) {
  require_ou(model);
  config.validate(model.params);
  const long long per_traj = config.samples_per_trajectory();
  const long long burn = config.burn_steps();
  const auto marks = checkpoints(per_traj);
  const int threads = resolve_threads(config.threads, config.n_traj);
  const Histogram hist_proto = Histogram::uniform(config.hist_lo, config.hist_hi, config.hist_bins);
  const Histogram abs_proto = Histogram::log_spaced(1e-3, 1e6, 90);

  std::vector<TrajectoryAccumulator> acc(static_cast<std::size_t>(config.n_traj));
  std::vector<Histogram> hists(static_cast<std::size_t>(threads), hist_proto);
  std::vector<Histogram> abs_hists(static_cast<std::size_t>(threads), abs_proto);

  parallel_for(config.n_traj, threads, [&](long long i, int w) {
    TrajectoryAccumulator& a = acc[static_cast<std::size_t>(i)];
    a.prefix_x2.reserve(marks.size());
    Stepper s(model.params, config.dt, config.seed, static_cast<std::uint64_t>(i), config.refinement);
    s.start(std::nullopt);
    for (long long k = 0; k < burn; ++k) s.step();
    // Collect first; histograms only see trajectories that stay finite.
    std::vector<double> xs(static_cast<std::size_t>(per_traj));
    std::size_t next_mark = 0;
    double x2 = 0.0;
    for (long long k = 0; k < per_traj; ++k) {
      for (int j = 0; j < config.stride; ++j) s.step();
      const double x = s.x;
      if (!(std::abs(x) <= kDivergence)) {
        a.divergent = true;
        return;
      }
      xs[static_cast<std::size_t>(k)] = x;
      const double xx = x * x;
      a.sums[0] += x;
      a.sums[1] += xx;
      a.sums[2] += xx * x;
      a.sums[3] += xx * xx;
      x2 += xx;
      if (x < 0.0) a.negative += 1.0;
      if (std::abs(x) > config.exceed_threshold) a.exceed += 1.0;
      if (next_mark < marks.size() && k + 1 == marks[next_mark]) {
        a.prefix_x2.push_back(x2);
        ++next_mark;
      }
    }
    for (double x : xs) {
      hists[static_cast<std::size_t>(w)].add(x);
      abs_hists[static_cast<std::size_t>(w)].add(std::abs(x));
    }
  });

  EnsembleStats st;
  st.config = config;
  st.histogram = hist_proto;
  st.abs_histogram = abs_proto;
  for (int w = 0; w < threads; ++w) {
    for (int b = 0; b < st.histogram.bins(); ++b) st.histogram.counts[b] += hists[w].counts[b];
    st.histogram.total += hists[w].total;
    for (int b = 0; b < st.abs_histogram.bins(); ++b) st.abs_histogram.counts[b] += abs_hists[w].counts[b];
    st.abs_histogram.total += abs_hists[w].total;
  }

  for (const auto& a : acc) st.divergent += a.divergent ? 1 : 0;
  if (st.divergent * 1000 > config.n_traj) {
    throw NumericalError(std::to_string(st.divergent) + " of " + std::to_string(config.n_traj) +
                             " trajectories diverged; parameters outside the stable regime for dt",
                         static_cast<double>(st.divergent) / config.n_traj);
  }
  st.trajectories = config.n_traj - st.divergent;
  st.samples = static_cast<std::uint64_t>(st.trajectories) * static_cast<std::uint64_t>(per_traj);

  // Mean and standard error from per-trajectory means, merged in index order.
  const double m = static_cast<double>(per_traj);
  const double nt = static_cast<double>(st.trajectories);
  auto estimate = [&](auto&& per_traj_mean) {
    double s = 0.0, ss = 0.0;
    for (const auto& a : acc) {
      if (a.divergent) continue;
      const double v = per_traj_mean(a);
      s += v;
      ss += v * v;
    }
    Estimate e;
    e.mean = s / nt;
    e.se = nt > 1 ? std::sqrt(std::max(0.0, ss / nt - e.mean * e.mean) / (nt - 1)) : 0.0;
    return e;
  };
  for (int n = 0; n < 4; ++n) st.moments[n] = estimate([&](const auto& a) { return a.sums[n] / m; });
  st.negative_fraction = estimate([&](const auto& a) { return a.negative / m; });
  st.exceed_fraction = estimate([&](const auto& a) { return a.exceed / m; });
  for (std::size_t k = 0; k < marks.size(); ++k) {
    double s = 0.0;
    for (const auto& a : acc) {
      if (!a.divergent) s += a.prefix_x2[k];
    }
    const std::uint64_t count = static_cast<std::uint64_t>(marks[k]) * static_cast<std::uint64_t>(st.trajectories);
    st.running_second_moment.push_back({count, s / static_cast<double>(count)});
  }
  return st;
}

double histogram_l1(const Histogram& histogram, const GridPdf& pdf) {
  constexpr int kSub = 16;
  double l1 = 0.0;
  for (int b = 0; b < histogram.bins(); ++b) {
    const double lo = histogram.edges[b], w = histogram.width(b);
    double avg = 0.0;
    for (int k = 0; k < kSub; ++k) avg += interpolate(pdf, lo + (k + 0.5) * w / kSub);
    avg /= kSub;
    l1 += std::abs(histogram.density(b) - avg) * w;
  }
  return l1;
}

namespace {

// x^2(t) conditional on one xi path, weighted by dP/dQ where Q shifts the mean
// of the stationary OU law by mu. Given xi, x(t) = x0 Phi(0,t) + additive
// noise, so E[x^2 | xi] = x0^2 Phi(0,t)^2 + 2 D_f int_0^t Phi(s,t)^2 ds. Each
// segment [s,t] carries its own ratio: marginal at s times the transitions.
void conditional_tilted_path(const ModelParams& p, const RelaxationConfig& config, int stride,
                             std::uint64_t stream, std::vector<double>& path) {
  NormalStream rng(config.seed, stream);
  const double dt = config.dt;
  const double mu = -4.0 * p.epsilon * p.tau;
  const double a = std::exp(-dt / p.tau);
  const double s2 = -std::expm1(-2.0 * dt / p.tau);
  const double sd = std::sqrt(s2);
  auto log_marginal = [mu](double xi) { return 0.5 * mu * mu - mu * xi; };

  double xi = mu + rng.normal();
  const double c0 = log_marginal(xi);
  double log_x0 = c0;  // log of the weighted Phi(0,t)^2 factor
  double noise = 0.0;  // weighted 2 D_f int_0^t Phi(s,t)^2 ds
  double lead = std::exp(c0);
  path[0] = config.x0 * config.x0 * std::exp(log_x0);
  for (std::size_t k = 1; k < path.size(); ++k) {
    for (int j = 0; j < stride; ++j) {
      const double next = mu + a * (xi - mu) + sd * rng.normal();
      const double r_p = next - a * xi;
      const double r_q = r_p - mu * (1.0 - a);
      const double d = (r_q * r_q - r_p * r_p) / (2.0 * s2) - 2.0 * p.gamma * dt - p.epsilon * dt * (xi + next);
      const double g = std::exp(d);
      const double trail = std::exp(log_marginal(next));
      noise = g * noise + p.d_f * dt * (lead * g + trail);
      lead = trail;
      log_x0 += d;
      xi = next;
    }
    path[k] = config.x0 * config.x0 * std::exp(log_x0) + noise;
  }
}

}  // namespace

RelaxationCurve relaxation_second_moment(const Model& model, const RelaxationConfig& config) {
  require_ou(model);
  model.params.validate();
  if (!(config.dt > 0.0) || !(config.sample_interval >= config.dt) || !(config.t_end > 0.0) || config.n_traj < 2) {
    throw std::invalid_argument("relaxation: invalid configuration");
  }
  if (config.dt > max_stable_dt(model.params) * (1.0 + 1e-12)) {
    throw std::invalid_argument("relaxation: dt exceeds the stability guard");
  }
  const int stride = std::max(1, static_cast<int>(std::lround(config.sample_interval / config.dt)));
  const int n_times = static_cast<int>(std::floor(config.t_end / (stride * config.dt) + 1e-9)) + 1;

  // Fixed-size blocks of trajectories keep the summation order independent of
  // the thread count.
  constexpr long long kBlock = 256;
  const long long n_blocks = (config.n_traj + kBlock - 1) / kBlock;
  std::vector<std::vector<double>> s1(static_cast<std::size_t>(n_blocks)), s2(static_cast<std::size_t>(n_blocks));
  std::vector<long long> diverged(static_cast<std::size_t>(n_blocks), 0);
  parallel_for(n_blocks, resolve_threads(config.threads, n_blocks), [&](long long blk, int) {
    auto& a = s1[static_cast<std::size_t>(blk)];
    auto& b = s2[static_cast<std::size_t>(blk)];
    a.assign(static_cast<std::size_t>(n_times), 0.0);
    b.assign(static_cast<std::size_t>(n_times), 0.0);
    const long long end = std::min(config.n_traj, (blk + 1) * kBlock);
    std::vector<double> path(static_cast<std::size_t>(n_times));
    for (long long i = blk * kBlock; i < end; ++i) {
      if (config.estimator == RelaxationEstimator::ConditionalTilted) {
        conditional_tilted_path(model.params, config, stride, static_cast<std::uint64_t>(i), path);
        for (int k = 0; k < n_times; ++k) {
          a[k] += path[k];
          b[k] += path[k] * path[k];
        }
        continue;
      }
      Stepper s(model.params, config.dt, config.seed, static_cast<std::uint64_t>(i));
      s.start(config.x0);
      bool ok = true;
      path[0] = s.x * s.x;
      for (int k = 1; k < n_times && ok; ++k) {
        for (int j = 0; j < stride; ++j) s.step();
        ok = std::abs(s.x) <= kDivergence;
        path[static_cast<std::size_t>(k)] = s.x * s.x;
      }
      if (!ok) {
        ++diverged[static_cast<std::size_t>(blk)];
        continue;
      }
      for (int k = 0; k < n_times; ++k) {
        a[k] += path[k];
        b[k] += path[k] * path[k];
      }
    }
  });

  long long bad = 0;
  for (long long d : diverged) bad += d;
  if (bad * 1000 > config.n_traj) {
    throw NumericalError("relaxation: " + std::to_string(bad) + " trajectories diverged",
                         static_cast<double>(bad) / config.n_traj);
  }
  const double n = static_cast<double>(config.n_traj - bad);
  RelaxationCurve c;
  for (int k = 0; k < n_times; ++k) {
    double a = 0.0, b = 0.0;
    for (long long blk = 0; blk < n_blocks; ++blk) {
      a += s1[blk][k];
      b += s2[blk][k];
    }
    const double mean = a / n;
    c.t.push_back(k * stride * config.dt);
    c.mean.push_back(mean);
    c.se.push_back(std::sqrt(std::max(0.0, b / n - mean * mean) / (n - 1)));
  }
  return c;
}

std::string ensemble_stats_json(const EnsembleStats& st) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json moments = nlohmann::ordered_json::array();
  for (int n = 1; n <= 4; ++n) {
    moments.push_back({{"order", n}, {"mean", st.moment(n).mean}, {"se", st.moment(n).se}});
  }
  j["moments"] = moments;
  j["negative_fraction"] = {{"mean", st.negative_fraction.mean}, {"se", st.negative_fraction.se}};
  j["exceed_fraction"] = {{"threshold", st.config.exceed_threshold},
                          {"mean", st.exceed_fraction.mean},
                          {"se", st.exceed_fraction.se}};
  j["samples"] = st.samples;
  j["trajectories"] = st.trajectories;
  j["divergent"] = st.divergent;
  nlohmann::ordered_json running = nlohmann::ordered_json::array();
  for (const auto& r : st.running_second_moment) running.push_back({{"samples", r.samples}, {"x2", r.value}});
  j["running_second_moment"] = running;
  const SimConfig& c = st.config;
  j["config"] = {{"dt", c.dt},         {"t_burn", c.t_burn},       {"t_end", c.t_end},
                 {"n_traj", c.n_traj}, {"seed", c.seed},           {"stride", c.stride},
                 {"scheme", "heun"},   {"hist_bins", c.hist_bins}, {"hist_lo", c.hist_lo},
                 {"hist_hi", c.hist_hi}, {"refinement", c.refinement}};
  return j.dump(2);
}

void write_histogram_csv(std::ostream& out, const Histogram& histogram,
                         const std::vector<std::pair<std::string, std::string>>& header) {
  for (const auto& [k, v] : header) out << "# " << k << '=' << v << '\n';
  out << "bin_center,density\n";
  for (int b = 0; b < histogram.bins(); ++b) {
    out << format_number(histogram.center(b)) << ',' << format_number(histogram.density(b)) << '\n';
  }
}

}  // namespace tome
