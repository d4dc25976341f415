#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <limits>
#include <string>

#include "tome/kernel.hpp"
#include "tome/master.hpp"

namespace tome {

class KeyValueConfig;

/// dx/dt = -E x + f(t) - epsilon xi(t) G x with <f f^T> = 2 D delta.
struct NdModel {
  Eigen::MatrixXd E;
  Eigen::MatrixXd D;
  Eigen::MatrixXd G;
  double epsilon = 0.0;
  CorrelationKernel kernel = CorrelationKernel::ornstein_uhlenbeck(1.0);

  int dim() const { return static_cast<int>(E.rows()); }
  /// Square, matching sizes, D symmetric within 1e-12, eigenvalues of E with
  /// positive real part. Throws std::invalid_argument.
  void validate() const;
};

struct NdCoefficients {
  Eigen::MatrixXd k_drift;  // integral phi(u) L(u) du
  Eigen::MatrixXd k_third;  // 2 integral phi(u) L(u) M(u) du
  double drift_error = 0.0;
  double third_error = 0.0;
};

inline constexpr double kInfiniteTime = std::numeric_limits<double>::infinity();

/// L(u) = exp(-E u) G exp(E u), computed as exp(-u ad_E) applied to G so that
/// only eigenvalue differences of E enter. Throws NumericalError when
/// u ||ad_E|| is too large to exponentiate.
Eigen::MatrixXd lie_evolved_coupling(const NdModel& model, double u);

struct Gramian {
  Eigen::MatrixXd value;
  double error = 0.0;
};

/// M(u) = integral_0^u exp(-E s) D exp(-E^T s) ds by composite 8-point
/// Gauss-Legendre (error from panel doubling); u = kInfiniteTime solves
/// E M + M E^T = D. Throws NumericalError above 1e-9 ||M||.
Gramian noise_gramian(const NdModel& model, double u);

/// Solution of E M + M E^T = D.
Eigen::MatrixXd stationary_gramian(const Eigen::MatrixXd& E, const Eigen::MatrixXd& D);

/// Both coefficient matrices by adaptive Gauss-Kronrod over [0, inf). Throws
/// NumericalError("correlation too long for spectral gap") when the Lie
/// growth outpaces the kernel decay.
NdCoefficients nd_coefficients(const NdModel& model);

/// Scalar assembly a1 = E + eps^2 g K_drift, d2 = eps^2 g K_drift,
/// c1 = eps^2 g K_third, d0 = D. Requires dim() == 1.
FluxCoefficients reduce_to_flux(const NdModel& model, const NdCoefficients& coeffs);

/// Rows separated by ';' or newlines, entries by ',' or whitespace.
Eigen::MatrixXd parse_matrix(const std::string& text);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);
std::string matrix_to_csv(const Eigen::MatrixXd& m);

/// Keys E, D, G (inline) or E_file, D_file, G_file, plus epsilon, tau,
/// kernel and kernel_file as for the scalar model.
NdModel nd_model_from_config(const KeyValueConfig& config);

}  // namespace tome
