#pragma once

#include <functional>
#include <span>
#include <vector>

#include "hesskit/dense_matrix.hpp"
#include "hesskit/spectral.hpp"
#include "hesskit/symmetric_operator.hpp"

namespace hesskit {

/// Full dense eigendecomposition: eigenvalues ascending, eigenvectors as
/// the columns of an orthonormal matrix.
struct FullSpectrum {
  std::vector<double> eigenvalues;
  DenseMatrix eigenvectors;
};

struct Materialized {
  DenseMatrix matrix;  // symmetrized (M + M^T)/2
  double asymmetry;    // max |M - M^T| before symmetrizing
};

/// Materializes the operator column by column (column j = op(e_j)).
/// Refuses dimensions above the cap to guard against accidental huge
/// materializations. Columns may be evaluated in parallel; the result is
/// ordered by index either way.
Materialized materialize(const SymmetricOperator& op, std::size_t cap = 2000,
                         int threads = 1);

/// Cyclic Jacobi rotations iterated until the off-diagonal Frobenius mass
/// drops below 1e-12 * ||A||_F. Input must be symmetric within 1e-8
/// entrywise (scaled by max |a_ij|).
FullSpectrum dense_symmetric_eig(const DenseMatrix& a);

/// Gaussian-smoothed spectral density evaluated directly from known
/// eigenvalues: phi_sigma(t) = (1/m) sum_i f(lambda_i; t, sigma).
SpectralDensity exact_density(const FullSpectrum& spectrum, double sigma,
                              std::span<const double> grid);

using GradientFn =
    std::function<std::vector<double>(std::span<const double>)>;

/// Central-difference Hessian-vector product
///   (g(theta + eps v) - g(theta - eps v)) / (2 eps)
/// from any gradient evaluator. eps <= 0 selects the default
/// 1e-4 * max(1, ||theta||_inf).
std::vector<double> fd_hvp(const GradientFn& gradient,
                           std::span<const double> theta,
                           std::span<const double> v, double eps = 0.0);

}  // namespace hesskit
