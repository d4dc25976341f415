#pragma once

#include <limits>
#include <string>
#include <vector>

#include "tome/kernel.hpp"

namespace tome {

class KeyValueConfig;

/// Physical inputs of dx/dt = -gamma x + f(t) - epsilon x xi(t).
///
/// The additive white noise is normalized as <f(t) f(t')> = 2 d_f delta(t - t'),
/// so the unperturbed generator is gamma d/dx x + d_f d^2/dx^2 and the
/// unperturbed stationary variance is d_f / gamma.
struct ModelParams {
  double gamma = 1.0;    // relaxation rate [1/time]
  double epsilon = 0.0;  // multiplicative noise strength [1/time]
  double tau = 1.0;      // correlation time, integral of phi [time]
  double d_f = 0.0;      // additive diffusion coefficient [x^2/time]

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Parameters together with the correlation kernel of xi(t).
struct Model {
  ModelParams params;
  CorrelationKernel kernel = CorrelationKernel::ornstein_uhlenbeck(1.0);

  static Model ornstein_uhlenbeck(double gamma, double epsilon, double tau, double d_f);
};

inline constexpr int kUnboundedMoments = std::numeric_limits<int>::max();

/// Dimensionless scales consumed by every downstream module.
struct DerivedScales {
  double delta = 0.0;      // epsilon * tau
  double gamma_tau = 0.0;  // gamma * tau
  double theta = 0.0;      // memory time (tau - phi_hat(2 gamma)) / (gamma tau)
  double r = 0.0;          // epsilon * theta
  double big_r = 0.0;      // delta * r, strength of the non-Fick current
  double alpha_tail = std::numeric_limits<double>::infinity();  // |x|^-alpha tail
  int n_max_moment = kUnboundedMoments;  // largest n with 1 - n delta^2/(gamma tau) > 0
  bool weak_regime_ok = true;            // big_r < 1

  /// delta^2 / (gamma tau), the ratio that controls moment existence.
  double moment_ratio() const { return delta * delta / gamma_tau; }
  bool moment_exists(int n) const { return n <= n_max_moment; }
};

/// phi_hat(s) = integral_0^inf phi(u) exp(-s u) du.
double laplace_phi(const CorrelationKernel& kernel, double s);

/// Throws std::invalid_argument if params are invalid or the kernel integral
/// disagrees with params.tau by more than 1e-6 relative.
DerivedScales derived_scales(const ModelParams& params, const CorrelationKernel& kernel);

inline DerivedScales derived_scales(const Model& model) {
  return derived_scales(model.params, model.kernel);
}

/// Builds a model from keys gamma, epsilon, tau, d_f, kernel (ou | tabulated)
/// and kernel_file (two-column u,phi CSV, required for tabulated kernels).
Model model_from_config(const KeyValueConfig& config);

}  // namespace tome
