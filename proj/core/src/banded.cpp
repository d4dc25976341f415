#include "tome/banded.hpp"

#include <lapacke.h>

#include <stdexcept>
#include <string>

#include "tome/errors.hpp"

namespace tome {

BandMatrix::BandMatrix(int n, int kl, int ku)
    : n_(n), kl_(kl), ku_(ku), ld_(2 * kl + ku + 1),
      data_(static_cast<std::size_t>(2 * kl + ku + 1) * static_cast<std::size_t>(n), 0.0) {
  if (n < 1 || kl < 0 || ku < 0) throw std::invalid_argument("BandMatrix: bad dimensions");
}

double& BandMatrix::at(int i, int j) {
  if (!in_band(i, j)) throw std::out_of_range("BandMatrix: entry outside the band");
  return data_[static_cast<std::size_t>(j) * ld_ + (kl_ + ku_ + i - j)];
}

double BandMatrix::at(int i, int j) const {
  if (!in_band(i, j)) return 0.0;
  return data_[static_cast<std::size_t>(j) * ld_ + (kl_ + ku_ + i - j)];
}

void BandMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (int i = 0; i < n_; ++i) {
    double s = 0.0;
    const int lo = std::max(0, i - kl_), hi = std::min(n_ - 1, i + ku_);
    for (int j = lo; j <= hi; ++j) s += data_[static_cast<std::size_t>(j) * ld_ + (kl_ + ku_ + i - j)] * x[j];
    y[i] = s;
  }
}

std::vector<double> BandMatrix::column_sums() const {
  std::vector<double> s(static_cast<std::size_t>(n_), 0.0);
  for (int j = 0; j < n_; ++j) {
    const int lo = std::max(0, j - ku_), hi = std::min(n_ - 1, j + kl_);
    for (int i = lo; i <= hi; ++i) s[j] += at(i, j);
  }
  return s;
}

BandMatrix BandMatrix::shifted(double alpha, double beta) const {
  BandMatrix out = *this;
  for (double& v : out.data_) v *= beta;
  for (int i = 0; i < n_; ++i) out.at(i, i) += alpha;
  return out;
}

BandLU::BandLU(BandMatrix matrix) : lu_(std::move(matrix)), pivots_(static_cast<std::size_t>(lu_.size())) {
  const lapack_int info = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, lu_.size(), lu_.size(), lu_.lower(), lu_.upper(),
                                         lu_.data(), lu_.leading_dimension(), pivots_.data());
  if (info > 0) throw NumericalError("banded solver: singular matrix at pivot " + std::to_string(info));
  if (info < 0) throw std::invalid_argument("banded solver: invalid argument " + std::to_string(-info));
}

void BandLU::solve(std::span<double> b) const {
  const lapack_int info =
      LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', lu_.size(), lu_.lower(), lu_.upper(), 1,
                     const_cast<double*>(const_cast<BandMatrix&>(lu_).data()), lu_.leading_dimension(),
                     pivots_.data(), b.data(), lu_.size());
  if (info != 0) throw NumericalError("banded solver: dgbtrs failed with code " + std::to_string(info));
}

}  // namespace tome
