#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace tome {

/// Raised when a computation cannot reach its accuracy or stability target.
/// `estimate()` carries the best error estimate that was achieved, or NaN
/// when no meaningful estimate exists.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what,
                          double estimate = std::numeric_limits<double>::quiet_NaN())
      : std::runtime_error(what), estimate_(estimate) {}

  double estimate() const noexcept { return estimate_; }

 private:
  double estimate_;
};

}  // namespace tome
