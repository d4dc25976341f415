#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "tome/model.hpp"

namespace tome {

/// <x^0> ... <x^n_max> at one instant.
struct MomentState {
  int n_max = 2;
  std::vector<double> values;  // values[0] == 1
};

/// Lower-triangular generator d<x^n>/dt = lambda_n <x^n> + c_n <x^(n-2)> with
/// lambda_n = -n gamma (1 - n delta^2/(gamma tau)) and
/// c_n = n (n-1) d_f (1 - n R). Requires even n_max >= 2.
Eigen::MatrixXd moment_generator_matrix(int n_max, const DerivedScales& scales, const ModelParams& params);

/// Decay rate n gamma (1 - n delta^2/(gamma tau)) of moment n.
double moment_decay_rate(int n, const DerivedScales& scales, const ModelParams& params);

struct MomentValue {
  bool divergent = false;
  double value = 0.0;
};

/// Closed-form equilibrium moment; odd orders vanish, even orders beyond the
/// existence limit are Divergent.
MomentValue equilibrium_moment(int n, const DerivedScales& scales, const ModelParams& params);

/// Same hierarchy with the non-Fick strength R set to zero (Fokker-Planck moments).
MomentValue equilibrium_moment_fick(int n, const DerivedScales& scales, const ModelParams& params);

struct MomentEvolution {
  MomentState state;
  bool transient_only = false;  // some rate is not negative: no equilibrium to approach
  bool used_matrix_exponential = false;
};

/// Exact propagation by the closed-form exponential cascade; falls back to the
/// matrix exponential when two rates nearly coincide.
MomentEvolution evolve_moments(const MomentState& state0, const Eigen::MatrixXd& matrix, double t);

/// CSV `n,equilibrium,rate,exists` for n = 1..n_max.
void write_moment_table(std::ostream& out, int n_max, const DerivedScales& scales, const ModelParams& params);

}  // namespace tome
