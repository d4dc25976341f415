#include "tome/kernel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include "tome/errors.hpp"

namespace tome {
namespace {

// 4-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 4> kGaussNodes = {-0.8611363115940526, -0.3399810435848563,
                                               0.3399810435848563, 0.8611363115940526};
constexpr std::array<double, 4> kGaussWeights = {0.3478548451374538, 0.6521451548625461,
                                                 0.6521451548625461, 0.3478548451374538};

double interpolate_panel(double u0, double u1, double p0, double p1, double u) {
  const double t = (u - u0) / (u1 - u0);
  if (p0 > 0.0 && p1 > 0.0) return p0 * std::exp(t * std::log(p1 / p0));
  return p0 + t * (p1 - p0);
}

}  // namespace

CorrelationKernel CorrelationKernel::ornstein_uhlenbeck(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw std::invalid_argument("ornstein_uhlenbeck kernel: tau must be finite and > 0");
  }
  CorrelationKernel k;
  k.kind_ = Kind::OrnsteinUhlenbeck;
  k.tau_ = tau;
  k.tail_rate_ = 1.0 / tau;
  return k;
}

CorrelationKernel CorrelationKernel::tabulated(std::vector<double> u, std::vector<double> phi) {
  if (u.size() != phi.size() || u.size() < 2) {
    throw std::invalid_argument("tabulated kernel: need at least two (u, phi) pairs of equal length");
  }
  if (u.front() != 0.0) throw std::invalid_argument("tabulated kernel: first sample must be at u = 0");
  if (std::abs(phi.front() - 1.0) > 1e-12) {
    throw std::invalid_argument("tabulated kernel: phi(0) must equal 1");
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!std::isfinite(u[i]) || !std::isfinite(phi[i])) {
      throw std::invalid_argument("tabulated kernel: non-finite sample");
    }
    if (i > 0 && !(u[i] > u[i - 1])) {
      throw std::invalid_argument("tabulated kernel: u must be strictly increasing");
    }
    if (phi[i] < 0.0) {
      throw std::invalid_argument("tabulated kernel: negative phi (oscillating kernels unsupported)");
    }
  }

  CorrelationKernel k;
  k.kind_ = Kind::TabulatedDecay;
  k.u_ = std::move(u);
  k.phi_ = std::move(phi);

  // Exponential tail from the last decade of magnitude.
  const std::size_t n = k.u_.size();
  const double last = k.phi_.back();
  if (last == 0.0) {
    k.tail_rate_ = std::numeric_limits<double>::infinity();
  } else {
    std::size_t first = n - 1;
    while (first > 0 && k.phi_[first - 1] > 0.0 && k.phi_[first - 1] <= 10.0 * last) --first;
    if (n - first < 2) first = n - 2;
    if (k.phi_[first] <= 0.0) {
      throw NumericalError("kernel not integrable: cannot fit tail through a zero sample");
    }
    double su = 0, sl = 0, suu = 0, sul = 0;
    const double m = static_cast<double>(n - first);
    for (std::size_t i = first; i < n; ++i) {
      const double l = std::log(k.phi_[i]);
      su += k.u_[i];
      sl += l;
      suu += k.u_[i] * k.u_[i];
      sul += k.u_[i] * l;
    }
    const double slope = (m * sul - su * sl) / (m * suu - su * su);
    if (!(slope < 0.0)) throw NumericalError("kernel not integrable: tail does not decay");
    k.tail_rate_ = -slope;
  }
  k.tau_ = k.laplace(0.0);
  return k;
}

CorrelationKernel CorrelationKernel::from_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open kernel file: " + path.string());
  std::vector<double> u, phi;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    for (char& c : line) {
      if (c == ',' || c == ';' || c == '\t') c = ' ';
    }
    std::istringstream ss(line);
    double a = 0, b = 0;
    if (!(ss >> a >> b)) {
      if (u.empty()) continue;  // header row
      throw std::invalid_argument("kernel file " + path.string() + ":" + std::to_string(line_no) +
                                  ": expected two numbers");
    }
    u.push_back(a);
    phi.push_back(b);
  }
  return tabulated(std::move(u), std::move(phi));
}

double CorrelationKernel::operator()(double u) const {
  if (u < 0.0) u = -u;
  if (kind_ == Kind::OrnsteinUhlenbeck) return std::exp(-u / tau_);
  if (u >= u_.back()) {
    if (phi_.back() == 0.0) return 0.0;
    return phi_.back() * std::exp(-tail_rate_ * (u - u_.back()));
  }
  auto it = std::upper_bound(u_.begin(), u_.end(), u);
  const std::size_t i = static_cast<std::size_t>(it - u_.begin()) - 1;
  return interpolate_panel(u_[i], u_[i + 1], phi_[i], phi_[i + 1], u);
}

template <typename Weight>
double CorrelationKernel::integrate_tabulated(Weight&& weight, double tail) const {
  double sum = 0.0;
  double comp = 0.0;
  for (std::size_t i = 0; i + 1 < u_.size(); ++i) {
    const double a = u_[i], b = u_[i + 1];
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    double panel = 0.0;
    for (std::size_t q = 0; q < kGaussNodes.size(); ++q) {
      const double u = mid + half * kGaussNodes[q];
      panel += kGaussWeights[q] * interpolate_panel(a, b, phi_[i], phi_[i + 1], u) * weight(u);
    }
    // Kahan summation across panels.
    const double y = panel * half - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum + tail;
}

double CorrelationKernel::laplace(double s) const {
  if (!(s >= 0.0)) throw std::invalid_argument("laplace_phi: s must be >= 0");
  if (kind_ == Kind::OrnsteinUhlenbeck) return tau_ / (1.0 + s * tau_);
  const double end = u_.back(), last = phi_.back();
  const double tail = last == 0.0 ? 0.0 : last * std::exp(-s * end) / (tail_rate_ + s);
  return integrate_tabulated([s](double u) { return std::exp(-s * u); }, tail);
}

double CorrelationKernel::memory_integral(double s) const {
  if (!(s >= 0.0)) throw std::invalid_argument("memory_integral: s must be >= 0");
  if (kind_ == Kind::OrnsteinUhlenbeck) return tau_ * (s * tau_) / (1.0 + s * tau_);
  const double end = u_.back(), last = phi_.back();
  const double lambda = tail_rate_;
  const double tail =
      last == 0.0 ? 0.0 : last * (s - lambda * std::expm1(-s * end)) / (lambda * (lambda + s));
  return integrate_tabulated([s](double u) { return -std::expm1(-s * u); }, tail);
}

}  // namespace tome
