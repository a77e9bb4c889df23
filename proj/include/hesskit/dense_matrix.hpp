#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hesskit {

/// Row-major square matrix of doubles. Oracle-side representation; nothing
/// here is tuned for speed.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  explicit DenseMatrix(std::size_t dim) : dim_(dim), a_(dim * dim, 0.0) {}

  static DenseMatrix identity(std::size_t dim);
  static DenseMatrix diagonal(std::span<const double> entries);

  std::size_t dim() const { return dim_; }

  double& at(std::size_t i, std::size_t j) { return a_[i * dim_ + j]; }
  double at(std::size_t i, std::size_t j) const { return a_[i * dim_ + j]; }

  std::span<const double> data() const { return a_; }
  std::span<double> data() { return a_; }

  double max_abs() const;
  double frobenius_norm() const;
  /// max_ij |a_ij - a_ji|
  double max_asymmetry() const;
  bool is_symmetric(double tol) const { return max_asymmetry() <= tol; }

 private:
  std::size_t dim_ = 0;
  std::vector<double> a_;
};

/// Standard matrix-vector product Av. Throws on dimension mismatch.
std::vector<double> dense_apply(const DenseMatrix& a, std::span<const double> v);

}  // namespace hesskit
