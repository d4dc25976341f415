#include "tome/moments.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "tome/grid.hpp"

namespace tome {
namespace {

MomentValue closed_form(int n, const DerivedScales& scales, const ModelParams& params, double big_r) {
  if (n < 1) throw std::invalid_argument("equilibrium_moment: n must be >= 1");
  if (n % 2 == 1) return {false, 0.0};
  if (!scales.moment_exists(n)) return {true, std::numeric_limits<double>::infinity()};
  const double q = scales.moment_ratio();
  double v = std::pow(params.d_f / params.gamma, n / 2);
  for (int k = n - 1; k > 1; k -= 2) v *= k;
  for (int j = 1; j <= n / 2; ++j) v *= (1.0 - 2.0 * j * big_r) / (1.0 - 2.0 * j * q);
  return {false, v};
}

}  // namespace

Eigen::MatrixXd moment_generator_matrix(int n_max, const DerivedScales& scales, const ModelParams& params) {
  if (n_max < 2 || n_max % 2 != 0) throw std::invalid_argument("moment_generator_matrix: n_max must be even and >= 2");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_max + 1, n_max + 1);
  for (int n = 1; n <= n_max; ++n) {
    m(n, n) = -moment_decay_rate(n, scales, params);
    if (n >= 2) m(n, n - 2) = n * (n - 1) * params.d_f * (1.0 - n * scales.big_r);
  }
  return m;
}

double moment_decay_rate(int n, const DerivedScales& scales, const ModelParams& params) {
  return n * params.gamma * (1.0 - n * scales.moment_ratio());
}

MomentValue equilibrium_moment(int n, const DerivedScales& scales, const ModelParams& params) {
  return closed_form(n, scales, params, scales.big_r);
}

MomentValue equilibrium_moment_fick(int n, const DerivedScales& scales, const ModelParams& params) {
  return closed_form(n, scales, params, 0.0);
}

MomentEvolution evolve_moments(const MomentState& state0, const Eigen::MatrixXd& matrix, double t) {
  const int n_max = state0.n_max;
  if (static_cast<int>(state0.values.size()) != n_max + 1 || matrix.rows() != n_max + 1 || matrix.cols() != n_max + 1) {
    throw std::invalid_argument("evolve_moments: state and matrix sizes disagree");
  }
  if (state0.values[0] != 1.0) throw std::invalid_argument("evolve_moments: <x^0> must be 1");
  if (!(t >= 0.0)) throw std::invalid_argument("evolve_moments: t must be >= 0");

  MomentEvolution out;
  out.state.n_max = n_max;
  for (int n = 1; n <= n_max; ++n) out.transient_only |= !(matrix(n, n) < 0.0);

  double scale = 0.0;
  for (int n = 0; n <= n_max; ++n) scale = std::max(scale, std::abs(matrix(n, n)));
  bool near_degenerate = false;
  for (int n = 0; n <= n_max; ++n) {
    for (int k = n % 2; k < n; k += 2) {
      if (std::abs(matrix(n, n) - matrix(k, k)) <= 1e-6 * std::max(scale, 1e-300)) near_degenerate = true;
    }
  }

  if (near_degenerate) {
    const Eigen::MatrixXd prop = (matrix * t).exp();
    const Eigen::VectorXd m0 = Eigen::Map<const Eigen::VectorXd>(state0.values.data(), n_max + 1);
    const Eigen::VectorXd m = prop * m0;
    out.state.values.assign(m.data(), m.data() + m.size());
    out.state.values[0] = 1.0;
    out.used_matrix_exponential = true;
    return out;
  }

  // m_n(t) = sum_k A(n, k) exp(lambda_k t) over k of the same parity, k <= n.
  Eigen::MatrixXd amp = Eigen::MatrixXd::Zero(n_max + 1, n_max + 1);
  for (int n = 0; n <= n_max; ++n) {
    double rest = 0.0;
    if (n >= 2) {
      const double c = matrix(n, n - 2);
      for (int k = n % 2; k < n; k += 2) {
        amp(n, k) = c * amp(n - 2, k) / (matrix(k, k) - matrix(n, n));
        rest += amp(n, k);
      }
    }
    amp(n, n) = state0.values[n] - rest;
  }
  out.state.values.resize(static_cast<std::size_t>(n_max + 1));
  for (int n = 0; n <= n_max; ++n) {
    double v = 0.0;
    for (int k = n % 2; k <= n; k += 2) v += amp(n, k) * std::exp(matrix(k, k) * t);
    out.state.values[n] = v;
  }
  out.state.values[0] = 1.0;
  return out;
}

void write_moment_table(std::ostream& out, int n_max, const DerivedScales& scales, const ModelParams& params) {
  out << "n,equilibrium,rate,exists\n";
  for (int n = 1; n <= n_max; ++n) {
    const MomentValue v = equilibrium_moment(n, scales, params);
    const bool exists = n % 2 == 1 ? scales.moment_exists(n) : !v.divergent;
    out << n << ',' << (v.divergent ? std::string("inf") : format_number(v.value)) << ','
        << format_number(moment_decay_rate(n, scales, params)) << ',' << (exists ? "true" : "false") << '\n';
  }
}

}  // namespace tome
