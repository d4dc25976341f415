#pragma once

namespace tome {

/// Arguments of the confluent hypergeometric function 1F1(a; b; z).
struct Kummer13Args {
  double a = 0.0;
  double b = 1.0;
  double z = 0.0;
};

enum class KummerMethod {
  Identity,          // z = 0, a = 0 or a = b
  PowerSeries,       // direct series, z > 0 or terminating
  TransformedSeries, // e^z 1F1(b - a; b; -z) for z < 0
  Asymptotic,        // large-|z| expansion
};

struct KummerEvaluation {
  double value = 0.0;
  double relative_error = 0.0;  // a-posteriori estimate
  KummerMethod method = KummerMethod::Identity;
  int terms = 0;
  bool extended_precision = false;  // escalated beyond 64-bit mantissa arithmetic
};

/// |z| at and above which the large-argument expansion is attempted before
/// falling back to the series: 30 + |a| + |b|.
double kummer_asymptotic_crossover(double a, double b);

/// 1F1(a; b; z) with a relative accuracy target of 1e-10 over
/// a, b in (0, 100], z in [-1e4, 1e2].
///
/// For z < 0 the series is evaluated after the Kummer transformation
/// 1F1(a; b; z) = e^z 1F1(b - a; b; -z). Sums run in 64-bit-mantissa
/// extended precision with compensated summation and are repeated in
/// 113-bit arithmetic when the cancellation estimate demands it, then in
/// MPFR at a precision sized to the observed cancellation (a > b with
/// moderate negative z).
///
/// Throws std::invalid_argument("invalid b") when b is zero or a negative
/// integer, and NumericalError (carrying the achieved estimate) when the
/// target cannot be met.
double kummer_1f1(const Kummer13Args& args);

KummerEvaluation kummer_1f1_evaluate(const Kummer13Args& args);

}  // namespace tome
