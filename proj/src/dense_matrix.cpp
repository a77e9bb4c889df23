#include "hesskit/dense_matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace hesskit {

DenseMatrix DenseMatrix::identity(std::size_t dim) {
  DenseMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) m.at(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> entries) {
  DenseMatrix m(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) m.at(i, i) = entries[i];
  return m;
}

double DenseMatrix::max_abs() const {
  double mx = 0.0;
  for (double x : a_) mx = std::max(mx, std::fabs(x));
  return mx;
}

double DenseMatrix::frobenius_norm() const {
  double s = 0.0;
  for (double x : a_) s += x * x;
  return std::sqrt(s);
}

double DenseMatrix::max_asymmetry() const {
  double mx = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = i + 1; j < dim_; ++j) {
      mx = std::max(mx, std::fabs(at(i, j) - at(j, i)));
    }
  }
  return mx;
}

std::vector<double> dense_apply(const DenseMatrix& a,
                                std::span<const double> v) {
  if (v.size() != a.dim()) {
    throw std::invalid_argument("dense_apply: dimension mismatch");
  }
  const std::size_t m = a.dim();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += a.at(i, j) * v[j];
    out[i] = acc;
  }
  return out;
}

}  // namespace hesskit
