#pragma once

// Independent reference computations for the test suite. None of these share
// code paths with the library: hypergeometric values come from MPFR series,
// integrals from GSL adaptive quadrature, matrix functions from
// eigendecompositions.

#include <Eigen/Dense>

#include <functional>

namespace oracle {

/// 1F1(a; b; z) by the direct power series in MPFR. The working precision is
/// raised until it exceeds the observed cancellation by 96 bits. Returns the
/// correctly rounded double (0 or denormal when the value underflows).
double hyp1f1(double a, double b, double z);

/// Same evaluation returned as log10 |value| to judge representability.
double hyp1f1_log10(double a, double b, double z);

/// integral_lo^inf f by GSL QAGIU; relative accuracy target rel.
double integrate_to_infinity(const std::function<double(double)>& f, double lo, double rel = 1e-12);

/// integral_lo^hi f by GSL QAGS.
double integrate(const std::function<double(double)>& f, double lo, double hi, double rel = 1e-12);

/// Exact stationary <x^2> of dx/dt = -gamma x + f - epsilon x xi with OU xi
/// (Stratonovich): 2 d_f integral exp(-2 gamma u + 4 delta^2 (u/tau - 1 + e^{-u/tau})) du.
/// Infinite when gamma tau <= 2 delta^2.
double sde_second_moment(double gamma, double epsilon, double tau, double d_f);

/// <x^2>(t) of the same SDE from x(0) = x0 with stationary xi:
/// x0^2 g(t) + 2 d_f integral_0^t g(u) du with g the integrand above.
double sde_relaxation_second_moment(double gamma, double epsilon, double tau, double d_f, double x0, double t);

/// exp(-E u) G exp(E u) by the adjoint series sum_k (-u)^k/k! ad_E^k(G) in
/// long double, stopped when the remainder bound drops below 1e-19 |G|.
Eigen::MatrixXd adjoint_series(const Eigen::MatrixXd& E, const Eigen::MatrixXd& G, double u);

/// exp(A) via a complex eigendecomposition (A assumed diagonalizable).
Eigen::MatrixXd expm_eigen(const Eigen::MatrixXd& A);

/// Solution of E M + M E^T = D via the eigenbasis of E.
Eigen::MatrixXd lyapunov_eigen(const Eigen::MatrixXd& E, const Eigen::MatrixXd& D);

/// integral_0^u exp(-E s) D exp(-E^T s) ds = M_inf - exp(-E u) M_inf exp(-E^T u).
Eigen::MatrixXd gramian_closed_form(const Eigen::MatrixXd& E, const Eigen::MatrixXd& D, double u);

}  // namespace oracle
