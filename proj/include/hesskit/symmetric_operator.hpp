#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hesskit/block_layout.hpp"
#include "hesskit/dense_matrix.hpp"

namespace hesskit {

/// Matrix-free symmetric linear operator: a dimension m and an apply
/// contract v -> Hv. Operators are immutable values; apply must be
/// reentrant so estimators can evaluate it from several threads at once.
class SymmetricOperator {
 public:
  using ApplyFn =
      std::function<void(std::span<const double>, std::span<double>)>;

  SymmetricOperator() = default;
  SymmetricOperator(std::size_t dim, ApplyFn apply)
      : dim_(dim), apply_(std::move(apply)) {}
  SymmetricOperator(std::size_t dim, ApplyFn apply, BlockLayout layout)
      : dim_(dim), apply_(std::move(apply)), layout_(std::move(layout)) {}

  std::size_t dim() const { return dim_; }

  /// Writes Hv into out. Throws std::invalid_argument on size mismatch.
  void apply(std::span<const double> v, std::span<double> out) const;

  std::vector<double> apply(std::span<const double> v) const {
    std::vector<double> out(dim_);
    apply(v, out);
    return out;
  }

  /// Optional named partition of the coordinates (present on model
  /// Hessians, where it names per-layer parameter segments).
  const std::optional<BlockLayout>& layout() const { return layout_; }

 private:
  std::size_t dim_ = 0;
  ApplyFn apply_;
  std::optional<BlockLayout> layout_;
};

/// Wraps a dense matrix as an operator (the matrix is copied once and
/// shared by all copies of the returned operator).
SymmetricOperator dense_operator(DenseMatrix a);
SymmetricOperator dense_operator(DenseMatrix a, BlockLayout layout);

/// Two-sided deflation v -> P op(P v) with P = I - sum_j u_j u_j^T.
/// Eigenvalues along the basis directions map to 0; the rest of the
/// spectrum is untouched. The basis must be orthonormal within 1e-6
/// (checked), and the two-sided form keeps the result symmetric.
SymmetricOperator deflate(const SymmetricOperator& op,
                          const std::vector<std::vector<double>>& basis);

/// Principal-submatrix action on the selected segments: embed the
/// sub-vector into R^m with zeros elsewhere, apply op, slice the selected
/// coordinates back out. Selected coordinates keep layout order. The
/// returned operator carries the re-based sub-layout.
SymmetricOperator restrict_to_block(const SymmetricOperator& op,
                                    const BlockLayout& layout,
                                    const std::vector<std::string>& selected);

}  // namespace hesskit
