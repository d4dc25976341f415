#pragma once

#include <span>
#include <vector>

namespace tome {

/// Square band matrix with kl sub- and ku super-diagonals, stored in LAPACK
/// general-band layout with kl extra rows reserved for LU fill-in.
class BandMatrix {
 public:
  BandMatrix(int n, int kl, int ku);

  int size() const noexcept { return n_; }
  int lower() const noexcept { return kl_; }
  int upper() const noexcept { return ku_; }

  bool in_band(int i, int j) const noexcept { return j - i <= ku_ && i - j <= kl_ && i >= 0 && j >= 0 && i < n_ && j < n_; }
  double& at(int i, int j);
  double at(int i, int j) const;

  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const;
  /// Sum of each column.
  std::vector<double> column_sums() const;

  /// alpha * I + beta * this
  BandMatrix shifted(double alpha, double beta) const;

  double* data() noexcept { return data_.data(); }
  int leading_dimension() const noexcept { return ld_; }

 private:
  int n_, kl_, ku_, ld_;
  std::vector<double> data_;  // column-major, ld_ x n_
};

/// LU factorization with partial pivoting (dgbtrf) and solves (dgbtrs).
class BandLU {
 public:
  /// Throws NumericalError when the matrix is singular.
  explicit BandLU(BandMatrix matrix);

  /// Solves A x = b in place.
  void solve(std::span<double> b) const;

 private:
  BandMatrix lu_;
  std::vector<int> pivots_;
};

}  // namespace tome
