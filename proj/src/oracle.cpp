#include "hesskit/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hesskit {

Materialized materialize(const SymmetricOperator& op, std::size_t cap,
                         int threads) {
  const std::size_t m = op.dim();
  if (m > cap) {
    throw std::invalid_argument(
        "materialize: refusing dimension above the cap (" +
        std::to_string(m) + " > " + std::to_string(cap) + ")");
  }
  DenseMatrix raw(m);
  const int mi = static_cast<int>(m);
#pragma omp parallel for num_threads(std::max(threads, 1)) schedule(dynamic)
  for (int j = 0; j < mi; ++j) {
    std::vector<double> e(m, 0.0);
    e[j] = 1.0;
    const std::vector<double> col = op.apply(e);
    for (std::size_t i = 0; i < m; ++i) raw.at(i, j) = col[i];
  }

  Materialized out{DenseMatrix(m), raw.max_asymmetry()};
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      out.matrix.at(i, j) = 0.5 * (raw.at(i, j) + raw.at(j, i));
    }
  }
  return out;
}

FullSpectrum dense_symmetric_eig(const DenseMatrix& a) {
  const std::size_t m = a.dim();
  if (a.max_asymmetry() > 1e-8 * std::max(1.0, a.max_abs())) {
    throw std::invalid_argument("dense_symmetric_eig: input is not symmetric");
  }

  DenseMatrix w = a;  // working copy, driven to diagonal
  DenseMatrix q = DenseMatrix::identity(m);
  const double fro = a.frobenius_norm();

  auto off_norm = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) s += w.at(i, j) * w.at(i, j);
    }
    return std::sqrt(2.0 * s);
  };

  for (int sweep = 0; sweep < 60; ++sweep) {
    if (off_norm() <= 1e-12 * fro) break;
    for (std::size_t p = 0; p + 1 < m; ++p) {
      for (std::size_t r = p + 1; r < m; ++r) {
        const double apq = w.at(p, r);
        if (apq == 0.0) continue;
        const double theta = (w.at(r, r) - w.at(p, p)) / (2.0 * apq);
        // Smaller-in-magnitude root of t^2 + 2 theta t - 1 = 0.
        const double t =
            std::copysign(1.0, theta) /
            (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        const double app = w.at(p, p);
        const double arr = w.at(r, r);
        w.at(p, p) = app - t * apq;
        w.at(r, r) = arr + t * apq;
        w.at(p, r) = 0.0;
        w.at(r, p) = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
          if (k == p || k == r) continue;
          const double akp = w.at(k, p);
          const double akr = w.at(k, r);
          w.at(k, p) = c * akp - s * akr;
          w.at(p, k) = w.at(k, p);
          w.at(k, r) = c * akr + s * akp;
          w.at(r, k) = w.at(k, r);
        }
        for (std::size_t k = 0; k < m; ++k) {
          const double qkp = q.at(k, p);
          const double qkr = q.at(k, r);
          q.at(k, p) = c * qkp - s * qkr;
          q.at(k, r) = c * qkr + s * qkp;
        }
      }
    }
  }
  if (off_norm() > 1e-12 * fro) {
    throw std::runtime_error("dense_symmetric_eig: Jacobi did not converge");
  }

  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
    return w.at(i, i) < w.at(j, j);
  });

  FullSpectrum result{std::vector<double>(m), DenseMatrix(m)};
  for (std::size_t col = 0; col < m; ++col) {
    result.eigenvalues[col] = w.at(idx[col], idx[col]);
    for (std::size_t row = 0; row < m; ++row) {
      result.eigenvectors.at(row, col) = q.at(row, idx[col]);
    }
  }
  return result;
}

SpectralDensity exact_density(const FullSpectrum& spectrum, double sigma,
                              std::span<const double> grid) {
  if (sigma <= 0.0) {
    throw std::invalid_argument("exact_density: sigma must be > 0");
  }
  SpectralDensity density;
  density.sigma = sigma;
  density.grid.assign(grid.begin(), grid.end());
  density.values.resize(grid.size());
  const double inv_m =
      1.0 / static_cast<double>(spectrum.eigenvalues.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double acc = 0.0;
    for (double lambda : spectrum.eigenvalues) {
      acc += gaussian_kernel(lambda, grid[i], sigma);
    }
    density.values[i] = acc * inv_m;
  }
  return density;
}

std::vector<double> fd_hvp(const GradientFn& gradient,
                           std::span<const double> theta,
                           std::span<const double> v, double eps) {
  if (theta.size() != v.size()) {
    throw std::invalid_argument("fd_hvp: theta and v differ in length");
  }
  if (eps <= 0.0) {
    double inf_norm = 0.0;
    for (double x : theta) inf_norm = std::max(inf_norm, std::fabs(x));
    eps = 1e-4 * std::max(1.0, inf_norm);
  }
  std::vector<double> plus(theta.begin(), theta.end());
  std::vector<double> minus(theta.begin(), theta.end());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    plus[i] += eps * v[i];
    minus[i] -= eps * v[i];
  }
  const std::vector<double> gp = gradient(plus);
  const std::vector<double> gm = gradient(minus);
  std::vector<double> out(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    out[i] = (gp[i] - gm[i]) / (2.0 * eps);
  }
  return out;
}

}  // namespace hesskit
