#include "tome/kummer.hpp"

#include <cfloat>
#include <cmath>
#include <stdexcept>
#include <string>

#include <mpfr.h>

extern "C" {
#include <quadmath.h>
}

#include "tome/errors.hpp"

namespace tome {
namespace {

constexpr double kTargetRelative = 1e-10;
// Extended-precision results are trusted only well inside the target so that
// estimate slop never lets a bad value through.
constexpr double kExtendedAccept = 1e-12;

template <typename T>
struct Arith;

template <>
struct Arith<long double> {
  static constexpr long double eps = LDBL_EPSILON;
  static constexpr long double big = 1e4000L;
  static long double exp(long double x) { return expl(x); }
  static long double log(long double x) { return logl(x); }
  static long double abs(long double x) { return fabsl(x); }
  static long double sqrt(long double x) { return sqrtl(x); }
  static long double ldexp(long double x, int e) { return ldexpl(x, e); }
};

template <>
struct Arith<__float128> {
  static inline const __float128 eps = ldexpq(1, -112);
  static inline const __float128 big = expq(9210);  // about 1e4000
  static __float128 exp(__float128 x) { return expq(x); }
  static __float128 log(__float128 x) { return logq(x); }
  static __float128 abs(__float128 x) { return fabsq(x); }
  static __float128 sqrt(__float128 x) { return sqrtq(x); }
  static __float128 ldexp(__float128 x, int e) { return ldexpq(x, e); }
};

bool is_nonpositive_integer(double v) { return v <= 0.0 && v == std::floor(v); }

struct SeriesOutcome {
  double value = 0.0;
  double relative_error = 0.0;
  int terms = 0;
  bool converged = false;
};

// exp(log_prefactor) * sum_k (alpha)_k / (beta)_k x^k / k!, with Kahan
// summation and power-of-two rescaling so that e^{1e4}-sized partial sums
// never overflow.
template <typename T>
SeriesOutcome sum_series(double alpha_d, double beta_d, double x_d, double log_prefactor) {
  using A = Arith<T>;
  const T alpha = alpha_d, beta = beta_d, x = x_d;
  const int max_terms = static_cast<int>(4.0 * std::abs(x_d) + 4.0 * std::abs(alpha_d) + 2000.0);
  constexpr int kRescale = 8192;

  T sum = 1, comp = 0, term = 1;
  T abs_sum = 1, weighted_abs = 4;  // sum |t_k| (3k + 4), for the rounding bound
  int scale = 0;
  int k = 0;
  bool converged = false;
  for (; k < max_terms; ++k) {
    const T kk = static_cast<T>(k);
    const T ratio = (alpha + kk) * x / ((beta + kk) * (kk + 1));
    term *= ratio;
    if (term == 0) {
      converged = true;  // terminating series
      ++k;
      break;
    }
    const T y = term - comp;
    const T t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    const T at = A::abs(term);
    abs_sum += at;
    weighted_abs += at * (3 * (kk + 1) + 4);

    if (A::abs(sum) > A::big || at > A::big) {
      sum = A::ldexp(sum, -kRescale);
      comp = A::ldexp(comp, -kRescale);
      term = A::ldexp(term, -kRescale);
      abs_sum = A::ldexp(abs_sum, -kRescale);
      weighted_abs = A::ldexp(weighted_abs, -kRescale);
      scale += kRescale;
    }

    // Past the sign changes and the peak the ratios decrease monotonically,
    // so the remainder is bounded by a geometric series.
    const T next_ratio = A::abs((alpha + kk + 1) * x / ((beta + kk + 1) * (kk + 2)));
    if (kk + 1 > -alpha && kk + 1 > A::abs(x) && next_ratio < 1) {
      const T remainder = at * next_ratio / (1 - next_ratio);
      if (remainder <= A::eps * A::abs(sum) * T(0.25)) {
        converged = true;
        ++k;
        break;
      }
    }
  }

  SeriesOutcome out;
  out.terms = k;
  out.converged = converged;
  if (sum == 0) {
    out.value = 0.0;
    out.relative_error = std::numeric_limits<double>::infinity();
    return out;
  }
  const T log_two = A::log(T(2));
  T value;
  if (scale == 0 && std::abs(log_prefactor) < 10000.0) {
    value = sum * A::exp(static_cast<T>(log_prefactor));
  } else {
    const T mag = A::exp(A::log(A::abs(sum)) + scale * log_two + static_cast<T>(log_prefactor));
    value = sum < 0 ? -mag : mag;
  }
  out.value = static_cast<double>(value);
  const T bound = A::eps * (weighted_abs / A::abs(sum) + A::sqrt(static_cast<T>(k + 1)));
  out.relative_error = static_cast<double>(bound) + DBL_EPSILON;
  return out;
}

// Last resort for series whose cancellation exceeds 113 bits (first
// parameter well below zero with moderate x): the same sum in MPFR with
// `prec` bits.
SeriesOutcome sum_series_mpfr(double alpha_d, double beta_d, double x_d, double log_prefactor, long prec) {
  mpfr_t alpha, beta, x, term, sum, t;
  mpfr_inits2(prec, alpha, beta, x, term, sum, t, static_cast<mpfr_ptr>(nullptr));
  mpfr_set_d(alpha, alpha_d, MPFR_RNDN);
  mpfr_set_d(beta, beta_d, MPFR_RNDN);
  mpfr_set_d(x, x_d, MPFR_RNDN);
  mpfr_set_ui(term, 1, MPFR_RNDN);
  mpfr_set_ui(sum, 1, MPFR_RNDN);
  const int max_terms = static_cast<int>(4.0 * std::abs(x_d) + 4.0 * std::abs(alpha_d) + 2000.0);
  long max_exp = 1;
  int k = 0;
  bool converged = false;
  for (; k < max_terms; ++k) {
    mpfr_add_si(t, alpha, k, MPFR_RNDN);
    mpfr_mul(term, term, t, MPFR_RNDN);
    mpfr_mul(term, term, x, MPFR_RNDN);
    mpfr_add_si(t, beta, k, MPFR_RNDN);
    mpfr_div(term, term, t, MPFR_RNDN);
    mpfr_div_si(term, term, k + 1, MPFR_RNDN);
    if (mpfr_zero_p(term)) {
      converged = true;
      ++k;
      break;
    }
    mpfr_add(sum, sum, term, MPFR_RNDN);
    max_exp = std::max<long>(max_exp, mpfr_get_exp(term));
    const double kk = k;
    const double next_ratio = std::abs((alpha_d + kk + 1) * x_d / ((beta_d + kk + 1) * (kk + 2)));
    if (kk + 1 > -alpha_d && kk + 1 > std::abs(x_d) && next_ratio < 0.5 && !mpfr_zero_p(sum) &&
        mpfr_get_exp(term) < mpfr_get_exp(sum) - prec - 2) {
      converged = true;
      ++k;
      break;
    }
  }
  SeriesOutcome out;
  out.terms = k;
  out.converged = converged;
  if (mpfr_zero_p(sum)) {
    out.relative_error = std::numeric_limits<double>::infinity();
  } else {
    const long lost = std::max(0L, max_exp - mpfr_get_exp(sum));
    out.relative_error = std::ldexp(3.0 * k + 4.0, static_cast<int>(lost - prec + 1)) + DBL_EPSILON;
    mpfr_set_d(t, log_prefactor, MPFR_RNDN);
    mpfr_exp(t, t, MPFR_RNDN);
    mpfr_mul(sum, sum, t, MPFR_RNDN);
    out.value = mpfr_get_d(sum, MPFR_RNDN);
  }
  mpfr_clears(alpha, beta, x, term, sum, t, static_cast<mpfr_ptr>(nullptr));
  return out;
}

KummerEvaluation evaluate_series(double alpha, double beta, double x, double log_prefactor,
                                 KummerMethod method) {
  SeriesOutcome s = sum_series<long double>(alpha, beta, x, log_prefactor);
  bool extended = false;
  if (!s.converged || s.relative_error > kExtendedAccept) {
    s = sum_series<__float128>(alpha, beta, x, log_prefactor);
    extended = true;
  }
  // Precision from the observed cancellation, doubled until the bound holds.
  long prec = 113 + 64 + static_cast<long>(std::max(0.0, std::log2(std::max(1.0, s.relative_error / 1e-34))));
  for (int attempt = 0; (!s.converged || s.relative_error > kExtendedAccept) && attempt < 6; ++attempt) {
    s = sum_series_mpfr(alpha, beta, x, log_prefactor, prec);
    prec *= 2;
  }
  if (!s.converged || !(s.relative_error <= kTargetRelative)) {
    throw NumericalError("1F1 series stagnated: achieved relative error estimate " +
                             std::to_string(s.relative_error),
                         s.relative_error);
  }
  return KummerEvaluation{s.value, s.relative_error, method, s.terms, extended};
}

// log|Gamma(x)| and sign via the reentrant glibc routine.
long double log_abs_gamma(long double x, int* sign) { return lgammal_r(x, sign); }

// Large-|z| expansion
//   z -> -inf: Gamma(b)/Gamma(b-a) (-z)^-a sum (a)_s (a-b+1)_s / s! (-z)^-s
//   z -> +inf: Gamma(b)/Gamma(a) e^z z^(a-b) sum (b-a)_s (1-a)_s / s! z^-s
// The recessive exponential companion is required to be negligible. Returns
// false when the expansion cannot reach the target.
bool try_asymptotic(double a, double b, double z, KummerEvaluation& out) {
  const long double w = std::abs(z);
  const long double p = z < 0 ? a : b - a;          // first Pochhammer argument
  const long double q = z < 0 ? a - b + 1 : 1 - a;  // second Pochhammer argument
  const long double denom_gamma_arg = z < 0 ? b - a : a;
  const long double other_gamma_arg = z < 0 ? a : b - a;

  int sign_b = 1, sign_d = 1, sign_o = 1;
  const long double lg_b = log_abs_gamma(b, &sign_b);
  const long double lg_d = log_abs_gamma(denom_gamma_arg, &sign_d);
  const long double lg_o = log_abs_gamma(other_gamma_arg, &sign_o);

  // log of |recessive / dominant| leading-order ratio.
  const long double log_ratio =
      z < 0 ? -w + (2.0L * a - b) * logl(w) + lg_d - lg_o
            : -w + (b - 2.0L * a) * logl(w) + lg_d - lg_o;
  if (log_ratio > logl(1e-18L)) return false;

  long double sum = 1, comp = 0, u = 1, prev = 1;
  int s = 0;
  bool converged = false;
  for (; s < 500; ++s) {
    const long double ss = s;
    u *= (p + ss) * (q + ss) / ((ss + 1) * w);
    if (u == 0) {
      converged = true;
      break;
    }
    if (fabsl(u) > fabsl(prev)) return false;  // divergent before reaching tolerance
    const long double y = u - comp;
    const long double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    prev = u;
    if (fabsl(u) < LDBL_EPSILON * fabsl(sum) * 0.25L) {
      converged = true;
      break;
    }
  }
  if (!converged || sum == 0) return false;

  const long double log_mag = z < 0 ? lg_b - lg_d - a * logl(w)
                                    : lg_b - lg_d + w + (a - b) * logl(w);
  const int sign = sign_b * sign_d * (sum < 0 ? -1 : 1);
  const long double mag = expl(log_mag + logl(fabsl(sum)));
  out.value = static_cast<double>(sign * mag);
  // lgamma arguments near 100 carry absolute errors of a few ulp of ~400.
  const long double err = LDBL_EPSILON * (16.0L * (fabsl(lg_b) + fabsl(lg_d) + fabsl(log_mag)) + s + 4) +
                          expl(log_ratio);
  out.relative_error = static_cast<double>(err) + DBL_EPSILON;
  out.method = KummerMethod::Asymptotic;
  out.terms = s + 1;
  out.extended_precision = false;
  return out.relative_error <= kExtendedAccept;
}

}  // namespace

double kummer_asymptotic_crossover(double a, double b) { return 30.0 + std::abs(a) + std::abs(b); }

KummerEvaluation kummer_1f1_evaluate(const Kummer13Args& args) {
  const double a = args.a, b = args.b, z = args.z;
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(z)) {
    throw std::invalid_argument("1F1: non-finite argument");
  }
  if (is_nonpositive_integer(b)) throw std::invalid_argument("invalid b");

  if (z == 0.0 || a == 0.0) return KummerEvaluation{1.0, 0.0, KummerMethod::Identity, 0, false};
  if (a == b) return KummerEvaluation{std::exp(z), DBL_EPSILON, KummerMethod::Identity, 0, false};

  // Terminating series: 1F1 is a polynomial in z.
  if (is_nonpositive_integer(a)) return evaluate_series(a, b, z, 0.0, KummerMethod::PowerSeries);

  const double crossover = kummer_asymptotic_crossover(a, b);
  KummerEvaluation asym;
  if (z > 0.0) {
    if (z >= crossover && try_asymptotic(a, b, z, asym)) return asym;
    return evaluate_series(a, b, z, 0.0, KummerMethod::PowerSeries);
  }

  const double w = -z;
  const double c = b - a;
  if (!is_nonpositive_integer(c) && w >= crossover && try_asymptotic(a, b, z, asym)) return asym;
  return evaluate_series(c, b, w, z, KummerMethod::TransformedSeries);
}

double kummer_1f1(const Kummer13Args& args) { return kummer_1f1_evaluate(args).value; }

}  // namespace tome
