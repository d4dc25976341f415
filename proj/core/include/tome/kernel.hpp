#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace tome {

/// Normalized autocorrelation phi(u) = <xi(t+u) xi(t)> of the colored noise,
/// with phi(0) = 1. Either the Ornstein-Uhlenbeck law exp(-u/tau) or a
/// user-tabulated non-negative decaying curve.
class CorrelationKernel {
 public:
  enum class Kind { OrnsteinUhlenbeck, TabulatedDecay };

  static CorrelationKernel ornstein_uhlenbeck(double tau);

  /// Samples (u_i, phi_i) with u_0 = 0, strictly increasing u, phi_0 = 1 and
  /// phi_i >= 0. Between samples phi is interpolated log-linearly (linearly
  /// where a sample is zero); beyond the last sample an exponential fitted to
  /// the last decade of magnitude is used. Throws std::invalid_argument for
  /// malformed tables and NumericalError("kernel not integrable") when the
  /// fitted tail does not decay.
  static CorrelationKernel tabulated(std::vector<double> u, std::vector<double> phi);

  /// Reads a `u,phi` CSV (comment lines starting with '#', optional header).
  static CorrelationKernel from_csv(const std::filesystem::path& path);

  Kind kind() const noexcept { return kind_; }

  /// Correlation time of an OU kernel; the kernel integral otherwise.
  double tau() const noexcept { return tau_; }

  double operator()(double u) const;

  /// phi_hat(s) for s >= 0.
  double laplace(double s) const;

  /// integral_0^inf phi(u) (1 - exp(-s u)) du = phi_hat(0) - phi_hat(s),
  /// evaluated without the cancellation of the difference form.
  double memory_integral(double s) const;

  /// Exponential decay rate of the tail (1/tau for OU).
  double tail_decay_rate() const noexcept { return tail_rate_; }

  /// Sample table (empty for OU).
  std::span<const double> u_samples() const noexcept { return u_; }
  std::span<const double> phi_samples() const noexcept { return phi_; }

 private:
  CorrelationKernel() = default;

  template <typename Weight>
  double integrate_tabulated(Weight&& weight, double tail) const;

  Kind kind_ = Kind::OrnsteinUhlenbeck;
  double tau_ = 1.0;
  double tail_rate_ = 1.0;
  std::vector<double> u_;
  std::vector<double> phi_;
};

}  // namespace tome
