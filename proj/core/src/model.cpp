#include "tome/model.hpp"

#include <cmath>
#include <stdexcept>

#include "tome/config.hpp"

namespace tome {

void ModelParams::validate() const {
  auto finite = [](double v, const char* name) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string("model parameter ") + name + " is not finite");
  };
  finite(gamma, "gamma");
  finite(epsilon, "epsilon");
  finite(tau, "tau");
  finite(d_f, "d_f");
  if (!(gamma > 0.0)) throw std::invalid_argument("model parameter gamma must be > 0");
  if (!(tau > 0.0)) throw std::invalid_argument("model parameter tau must be > 0");
  if (epsilon < 0.0) throw std::invalid_argument("model parameter epsilon must be >= 0");
  if (d_f < 0.0) throw std::invalid_argument("model parameter d_f must be >= 0");
}

Model Model::ornstein_uhlenbeck(double gamma, double epsilon, double tau, double d_f) {
  Model m;
  m.params = ModelParams{gamma, epsilon, tau, d_f};
  m.params.validate();
  m.kernel = CorrelationKernel::ornstein_uhlenbeck(tau);
  return m;
}

double laplace_phi(const CorrelationKernel& kernel, double s) { return kernel.laplace(s); }

DerivedScales derived_scales(const ModelParams& params, const CorrelationKernel& kernel) {
  params.validate();
  const double kernel_tau = kernel.laplace(0.0);
  if (std::abs(kernel_tau - params.tau) > 1e-6 * params.tau) {
    throw std::invalid_argument("tau = " + std::to_string(params.tau) +
                                " does not match the kernel integral " + std::to_string(kernel_tau));
  }

  DerivedScales s;
  s.delta = params.epsilon * params.tau;
  s.gamma_tau = params.gamma * params.tau;
  // tau - phi_hat(2 gamma), evaluated as a single non-cancelling integral.
  s.theta = kernel.memory_integral(2.0 * params.gamma) / s.gamma_tau;
  s.r = params.epsilon * s.theta;
  s.big_r = s.delta * s.r;
  s.weak_regime_ok = s.big_r < 1.0;

  if (s.delta == 0.0) {
    s.alpha_tail = std::numeric_limits<double>::infinity();
    s.n_max_moment = kUnboundedMoments;
  } else {
    const double q = s.moment_ratio();
    s.alpha_tail = 1.0 / q + 1.0;
    const double limit = 1.0 / q;
    if (limit >= static_cast<double>(kUnboundedMoments)) {
      s.n_max_moment = kUnboundedMoments;
    } else {
      int n = static_cast<int>(std::floor(limit));
      while (n > 0 && !(1.0 - n * q > 0.0)) --n;
      s.n_max_moment = n;
    }
  }
  return s;
}

Model model_from_config(const KeyValueConfig& config) {
  Model m;
  m.params.gamma = config.require_double("gamma");
  m.params.epsilon = config.get_double("epsilon", 0.0);
  m.params.d_f = config.get_double("d_f", 0.0);
  const std::string kind = config.get_string("kernel", "ou");
  if (kind == "ou") {
    m.params.tau = config.require_double("tau");
    m.params.validate();
    m.kernel = CorrelationKernel::ornstein_uhlenbeck(m.params.tau);
  } else if (kind == "tabulated") {
    const auto file = config.get("kernel_file");
    if (!file) throw std::invalid_argument("kernel = tabulated requires kernel_file");
    m.kernel = CorrelationKernel::from_csv(*file);
    m.params.tau = config.get_double("tau", m.kernel.tau());
    m.params.validate();
  } else {
    throw std::invalid_argument(config.origin("kernel") + ": unknown kernel '" + kind +
                                "' (expected ou or tabulated)");
  }
  return m;
}

}  // namespace tome
