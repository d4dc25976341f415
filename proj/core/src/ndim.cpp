#include "tome/ndim.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "tome/config.hpp"
#include "tome/errors.hpp"
#include "tome/grid.hpp"

namespace tome {
namespace {

using Eigen::MatrixXd;

constexpr std::array<double, 8> kGlNodes = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                            -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                            0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGlWeights = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                              0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                              0.2223810344533745, 0.1012285362903763};

// Gauss-Kronrod 7/15 on [-1, 1]; nodes listed from the endpoint inwards.
constexpr std::array<double, 8> kXgk = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                        0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                        0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                        0.207784955007898467600689403773245, 0.0};
constexpr std::array<double, 8> kWgk = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                        0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                        0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                        0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                       0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

double min_real_eigenvalue(const MatrixXd& m) {
  const Eigen::VectorXcd ev = m.eigenvalues();
  double lo = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < ev.size(); ++i) lo = std::min(lo, ev[i].real());
  return lo;
}

MatrixXd adjoint_generator(const MatrixXd& e) {
  const MatrixXd id = MatrixXd::Identity(e.rows(), e.cols());
  return Eigen::kroneckerProduct(id, e).eval() - Eigen::kroneckerProduct(e.transpose(), id).eval();
}

struct PanelResult {
  MatrixXd drift, third;
  double drift_err = 0.0, third_err = 0.0;
};

class CoefficientIntegrator {
 public:
  explicit CoefficientIntegrator(const NdModel& m) : model_(m) {}

  // Integrands phi L and 2 phi L M at u.
  std::pair<MatrixXd, MatrixXd> integrand(double u) const {
    const double phi = model_.kernel(u);
    const MatrixXd l = lie_evolved_coupling(model_, u);
    const MatrixXd lm = l * noise_gramian(model_, u).value;
    return {phi * l, 2.0 * phi * lm};
  }

  PanelResult gauss_kronrod(double a, double b) const {
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    const int n = model_.dim();
    MatrixXd k1 = MatrixXd::Zero(n, n), k2 = MatrixXd::Zero(n, n);
    MatrixXd g1 = MatrixXd::Zero(n, n), g2 = MatrixXd::Zero(n, n);
    for (int j = 0; j < 8; ++j) {
      const double dx = half * kXgk[j];
      const int copies = j == 7 ? 1 : 2;
      for (int s = 0; s < copies; ++s) {
        const auto [f1, f2] = integrand(s == 0 ? mid - dx : mid + dx);
        k1 += kWgk[j] * f1;
        k2 += kWgk[j] * f2;
        if (j % 2 == 1) {
          g1 += kWg[j / 2] * f1;
          g2 += kWg[j / 2] * f2;
        }
      }
    }
    PanelResult r;
    r.drift = half * k1;
    r.third = half * k2;
    r.drift_err = half * (k1 - g1).norm();
    r.third_err = half * (k2 - g2).norm();
    return r;
  }

  PanelResult adaptive(double a, double b, double tol_drift, double tol_third, int depth) const {
    PanelResult whole = gauss_kronrod(a, b);
    if ((whole.drift_err <= tol_drift && whole.third_err <= tol_third) || depth >= 40) return whole;
    const double m = 0.5 * (a + b);
    PanelResult left = adaptive(a, m, 0.5 * tol_drift, 0.5 * tol_third, depth + 1);
    const PanelResult right = adaptive(m, b, 0.5 * tol_drift, 0.5 * tol_third, depth + 1);
    left.drift += right.drift;
    left.third += right.third;
    left.drift_err += right.drift_err;
    left.third_err += right.third_err;
    return left;
  }

 private:
  const NdModel& model_;
};

void require_square(const MatrixXd& m, int n, const char* name) {
  if (m.rows() != n || m.cols() != n) {
    throw std::invalid_argument(std::string("nd model: ") + name + " must be " + std::to_string(n) + "x" +
                                std::to_string(n));
  }
  if (!m.allFinite()) throw std::invalid_argument(std::string("nd model: ") + name + " has non-finite entries");
}

}  // namespace

void NdModel::validate() const {
  const int n = dim();
  if (n < 1) throw std::invalid_argument("nd model: empty E");
  require_square(E, n, "E");
  require_square(D, n, "D");
  require_square(G, n, "G");
  if (!std::isfinite(epsilon) || epsilon < 0.0) throw std::invalid_argument("nd model: epsilon must be >= 0");
  if ((D - D.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, D.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("nd model: D must be symmetric");
  }
  if (!(min_real_eigenvalue(E) > 0.0)) {
    throw std::invalid_argument("nd model: eigenvalues of E must have positive real part");
  }
}

namespace {

// V [G~_ij exp((lambda_j - lambda_i) u)] V^-1 with E = V Lambda V^-1 and
// G~ = V^-1 G V; empty when V is ill-conditioned or a coupled entry overflows.
std::optional<MatrixXd> lie_evolved_in_eigenbasis(const NdModel& model, double u) {
  const Eigen::ComplexEigenSolver<MatrixXd> es(model.E);
  const Eigen::MatrixXcd v = es.eigenvectors();
  const auto sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(v).singularValues();
  if (!(sv(sv.size() - 1) > 1e-8 * sv(0))) return std::nullopt;
  const Eigen::MatrixXcd vi = v.inverse();
  Eigen::MatrixXcd g = vi * model.G.cast<std::complex<double>>() * v;
  const double g_scale = g.cwiseAbs().maxCoeff();
  const Eigen::VectorXcd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      if (std::abs(g(i, j)) <= 1e-14 * g_scale) {
        g(i, j) = 0.0;
        continue;
      }
      const std::complex<double> arg = (ev[j] - ev[i]) * u;
      if (arg.real() > 700.0) return std::nullopt;
      g(i, j) *= std::exp(arg);
    }
  }
  const MatrixXd out = (v * g * vi).real();
  if (!out.allFinite()) return std::nullopt;
  return out;
}

}  // namespace

MatrixXd lie_evolved_coupling(const NdModel& model, double u) {
  if (!(u >= 0.0)) throw std::invalid_argument("lie_evolved_coupling: u must be >= 0");
  const int n = model.dim();
  if (u == 0.0) return model.G;
  const MatrixXd ad = adjoint_generator(model.E);
  const double size = ad.cwiseAbs().colwise().sum().maxCoeff() * u;
  if (size > 700.0) {
    // Too large for the propagator; the eigenbasis form only exponentiates
    // the differences that G actually couples.
    if (auto eig = lie_evolved_in_eigenbasis(model, u)) return *eig;
    throw NumericalError("lie_evolved_coupling: u ||ad E|| = " + std::to_string(size) + " overflows the exponential",
                         size);
  }
  const MatrixXd prop = (-u * ad).exp();
  const Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(model.G.data(), n * n);
  const Eigen::VectorXd l = prop * g;
  MatrixXd out = Eigen::Map<const MatrixXd>(l.data(), n, n);
  if (!out.allFinite()) throw NumericalError("lie_evolved_coupling: overflow");
  return out;
}

MatrixXd stationary_gramian(const MatrixXd& e, const MatrixXd& d) {
  const int n = static_cast<int>(e.rows());
  const MatrixXd id = MatrixXd::Identity(n, n);
  const MatrixXd op = Eigen::kroneckerProduct(id, e).eval() + Eigen::kroneckerProduct(e, id).eval();
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(d.data(), n * n);
  const Eigen::VectorXd sol = op.partialPivLu().solve(rhs);
  MatrixXd m = Eigen::Map<const MatrixXd>(sol.data(), n, n);
  return 0.5 * (m + m.transpose());
}

Gramian noise_gramian(const NdModel& model, double u) {
  const int n = model.dim();
  if (!(u >= 0.0)) throw std::invalid_argument("noise_gramian: u must be >= 0");
  if (u == 0.0) return {MatrixXd::Zero(n, n), 0.0};
  if (std::isinf(u)) {
    Gramian g{stationary_gramian(model.E, model.D), 0.0};
    g.error = (model.E * g.value + g.value * model.E.transpose() - model.D).norm();
    return g;
  }

  // Beyond s_sat the integrand is below e^-90 of its start; the remainder is dropped.
  const double norm_e = std::max(model.E.cwiseAbs().colwise().sum().maxCoeff(), 1e-300);
  const double s_sat = 45.0 / min_real_eigenvalue(model.E);
  const double span = std::min(u, s_sat);

  auto composite = [&](long panels) {
    const double w = span / static_cast<double>(panels);
    std::array<MatrixXd, 8> offsets;
    for (int k = 0; k < 8; ++k) offsets[k] = (-model.E * (0.5 * w * (1.0 + kGlNodes[k]))).exp();
    const MatrixXd advance = (-model.E * w).exp();
    MatrixXd start = MatrixXd::Identity(n, n);
    MatrixXd sum = MatrixXd::Zero(n, n);
    for (long p = 0; p < panels; ++p) {
      MatrixXd panel = MatrixXd::Zero(n, n);
      for (int k = 0; k < 8; ++k) {
        const MatrixXd x = start * offsets[k];
        panel += kGlWeights[k] * (x * model.D * x.transpose());
      }
      sum += 0.5 * w * panel;
      start = start * advance;
    }
    return sum;
  };

  long panels = std::max<long>(2, static_cast<long>(std::ceil(span * norm_e)));
  MatrixXd coarse = composite(panels);
  for (;;) {
    MatrixXd fine = composite(2 * panels);
    const double err = (fine - coarse).norm();
    const double scale = std::max(fine.norm(), 1e-300);
    if (err <= 1e-13 * scale || panels >= (1L << 16)) {
      if (err > 1e-9 * scale) {
        throw NumericalError("noise_gramian: quadrature error " + std::to_string(err / scale) + " relative", err);
      }
      return {0.5 * (fine + fine.transpose()), err};
    }
    panels *= 2;
    coarse = std::move(fine);
  }
}

namespace {

// Largest Re(lambda_j - lambda_i) over the eigenbasis entries of G that are
// nonzero; L(u) has entries G_ij exp((lambda_j - lambda_i) u) in that basis.
// Falls back to the full eigenvalue spread when E is far from diagonalizable.
double lie_growth_rate(const NdModel& model) {
  const Eigen::ComplexEigenSolver<MatrixXd> es(model.E);
  const Eigen::VectorXcd ev = es.eigenvalues();
  const Eigen::MatrixXcd v = es.eigenvectors();
  const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(v);
  const auto sv = svd.singularValues();
  const bool well_conditioned = sv(sv.size() - 1) > 1e-8 * sv(0);
  Eigen::MatrixXcd g;
  if (well_conditioned) g = v.inverse() * model.G.cast<std::complex<double>>() * v;
  const double g_scale = well_conditioned ? g.cwiseAbs().maxCoeff() : 0.0;
  double spread = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    for (Eigen::Index j = 0; j < ev.size(); ++j) {
      if (well_conditioned && std::abs(g(i, j)) <= 1e-14 * g_scale) continue;
      spread = std::max(spread, ev[j].real() - ev[i].real());
    }
  }
  return spread;
}

}  // namespace

NdCoefficients nd_coefficients(const NdModel& model) {
  model.validate();
  const int n = model.dim();
  const double spread = lie_growth_rate(model);
  const double decay = model.kernel.tail_decay_rate();
  if (!(spread < decay)) {
    throw NumericalError("correlation too long for spectral gap: Lie growth rate " + std::to_string(spread) +
                         " >= kernel decay rate " + std::to_string(decay));
  }

  const CoefficientIntegrator integrator(model);
  const double tau = model.kernel.tau();
  const double rate = decay - spread;
  NdCoefficients out;
  out.k_drift = MatrixXd::Zero(n, n);
  out.k_third = MatrixXd::Zero(n, n);

  // Geometric panels out to where the integrand bound e^{-rate u} is negligible.
  const double horizon = 40.0 / rate;
  double a = 0.0, b = std::min(0.25 * tau, 0.5 / std::max(1e-300, model.E.norm()));
  b = std::max(b, 1e-3 * tau);
  int quiet = 0;
  while (true) {
    const PanelResult first = integrator.gauss_kronrod(a, b);
    const double tol_d = 1e-14 * std::max(out.k_drift.norm() + first.drift.norm(), 1e-300);
    const double tol_t = 1e-14 * std::max(out.k_third.norm() + first.third.norm(), 1e-300);
    const PanelResult p = integrator.adaptive(a, b, tol_d, tol_t, 0);
    out.k_drift += p.drift;
    out.k_third += p.third;
    out.drift_error += p.drift_err;
    out.third_error += p.third_err;
    const bool small = p.drift.norm() <= 1e-17 * out.k_drift.norm() && p.third.norm() <= 1e-17 * out.k_third.norm();
    quiet = small ? quiet + 1 : 0;
    if ((b >= horizon && quiet >= 2) || b >= 4.0 * horizon) break;
    a = b;
    b = std::min(2.0 * b, a + 2.0 * tau);
  }
  if (!out.k_drift.allFinite() || !out.k_third.allFinite()) {
    throw NumericalError("correlation too long for spectral gap: integrand did not decay");
  }
  return out;
}

FluxCoefficients reduce_to_flux(const NdModel& model, const NdCoefficients& coeffs) {
  if (model.dim() != 1) throw std::invalid_argument("reduce_to_flux: scalar model required");
  const double e2g = model.epsilon * model.epsilon * model.G(0, 0);
  FluxCoefficients f;
  f.a1 = model.E(0, 0) + e2g * coeffs.k_drift(0, 0);
  f.d0 = model.D(0, 0);
  f.d2 = e2g * coeffs.k_drift(0, 0);
  f.c1 = e2g * coeffs.k_third(0, 0);
  return f;
}

MatrixXd parse_matrix(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::string row;
  std::istringstream in(text);
  auto flush = [&rows](std::string line) {
    for (char& c : line) {
      if (c == ',' || c == '\t') c = ' ';
    }
    std::istringstream ls(line);
    std::vector<double> values;
    std::string tok;
    while (ls >> tok) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) throw std::invalid_argument("matrix: bad number '" + tok + "'");
      values.push_back(v);
    }
    if (!values.empty()) rows.push_back(std::move(values));
  };
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    std::size_t start = 0;
    for (std::size_t pos; (pos = line.find(';', start)) != std::string::npos; start = pos + 1) {
      flush(line.substr(start, pos - start));
    }
    flush(line.substr(start));
  }
  if (rows.empty()) throw std::invalid_argument("matrix: no entries");
  const std::size_t cols = rows.front().size();
  MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw std::invalid_argument("matrix: ragged rows");
    for (std::size_t j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open matrix file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_matrix(ss.str());
}

std::string matrix_to_csv(const MatrixXd& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_number(m(i, j));
    }
    out += '\n';
  }
  return out;
}

NdModel nd_model_from_config(const KeyValueConfig& config) {
  auto matrix = [&config](const std::string& key) -> MatrixXd {
    if (const auto file = config.get(key + "_file")) return read_matrix_csv(*file);
    if (const auto inline_value = config.get(key)) return parse_matrix(*inline_value);
    throw std::invalid_argument("nd config: missing " + key + " (or " + key + "_file)");
  };
  NdModel m;
  m.E = matrix("E");
  m.D = matrix("D");
  m.G = matrix("G");
  m.epsilon = config.get_double("epsilon", 1.0);
  const std::string kind = config.get_string("kernel", "ou");
  if (kind == "ou") {
    m.kernel = CorrelationKernel::ornstein_uhlenbeck(config.require_double("tau"));
  } else if (kind == "tabulated") {
    const auto file = config.get("kernel_file");
    if (!file) throw std::invalid_argument("kernel = tabulated requires kernel_file");
    m.kernel = CorrelationKernel::from_csv(*file);
  } else {
    throw std::invalid_argument(config.origin("kernel") + ": unknown kernel '" + kind + "'");
  }
  m.validate();
  return m;
}

}  // namespace tome
