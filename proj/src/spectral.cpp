#include "hesskit/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace hesskit {

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace

std::vector<double> sample_probe(std::size_t dim, ProbeDistribution dist,
                                 RngStream& stream) {
  std::vector<double> v(dim);
  if (dist == ProbeDistribution::kRademacher) {
    for (double& x : v) x = stream.next_rademacher();
  } else {
    for (double& x : v) x = stream.next_gaussian();
  }
  return v;
}

EigenResult top_eigenpairs(const SymmetricOperator& op, int k, double tol,
                           int max_iter, std::uint64_t seed) {
  const std::size_t m = op.dim();
  if (k < 1 || static_cast<std::size_t>(k) > m) {
    throw std::invalid_argument("top_eigenpairs: k must be in [1, dim]");
  }
  if (tol <= 0.0) throw std::invalid_argument("top_eigenpairs: tol must be > 0");
  if (max_iter < 1) {
    throw std::invalid_argument("top_eigenpairs: max_iter must be >= 1");
  }

  EigenResult result;
  std::vector<std::vector<double>> basis;

  for (int j = 0; j < k; ++j) {
    const SymmetricOperator deflated =
        basis.empty() ? op : deflate(op, basis);

    // Start from a normalized Rademacher probe projected off the accepted
    // directions; retry on a (probability-zero) vanishing projection.
    RngStream stream(seed, static_cast<std::uint64_t>(j));
    std::vector<double> v;
    bool ok = false;
    for (int attempt = 0; attempt < 5 && !ok; ++attempt) {
      v = sample_probe(m, ProbeDistribution::kRademacher, stream);
      for (const auto& u : basis) {
        const double c = dot(u, v);
        for (std::size_t i = 0; i < m; ++i) v[i] -= c * u[i];
      }
      const double n = norm2(v);
      if (n > 1e-12 * std::sqrt(static_cast<double>(m))) {
        for (double& x : v) x /= n;
        ok = true;
      }
    }
    if (!ok) {
      throw std::runtime_error(
          "top_eigenpairs: could not find a nonzero start vector");
    }

    double lambda = 0.0;
    double lambda_prev = 0.0;
    double residual = 0.0;
    bool converged = false;
    int iters = 0;
    std::vector<double> w(m);

    for (int it = 1; it <= max_iter; ++it) {
      iters = it;
      deflated.apply(v, w);
      lambda = dot(v, w);
      double r2 = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double d = w[i] - lambda * v[i];
        r2 += d * d;
      }
      residual = std::sqrt(r2);
      const double wn = norm2(w);
      if (wn == 0.0) {
        // v is an exact null vector of the deflated operator.
        lambda = 0.0;
        residual = 0.0;
        converged = true;
        break;
      }
      const double change =
          std::fabs(lambda - lambda_prev) / std::max(std::fabs(lambda), 1e-300);
      if (it > 1 && change < tol && residual <= tol) {
        converged = true;
        break;
      }
      for (std::size_t i = 0; i < m; ++i) v[i] = w[i] / wn;
      lambda_prev = lambda;
    }

    // Modified Gram-Schmidt against the accepted basis before storing.
    for (const auto& u : basis) {
      const double c = dot(u, v);
      for (std::size_t i = 0; i < m; ++i) v[i] -= c * u[i];
    }
    const double n = norm2(v);
    if (n > 0.0) {
      for (double& x : v) x /= n;
    }

    basis.push_back(v);
    result.eigenvalues.push_back(lambda);
    result.eigenvectors.push_back(std::move(v));
    result.iterations_used.push_back(iters);
    result.residuals.push_back(residual);
    result.converged.push_back(converged);
  }

  // Power iteration finds pairs in magnitude order already; enforce it.
  std::vector<std::size_t> idx(result.eigenvalues.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(result.eigenvalues[a]) > std::fabs(result.eigenvalues[b]);
  });
  EigenResult sorted;
  for (std::size_t i : idx) {
    sorted.eigenvalues.push_back(result.eigenvalues[i]);
    sorted.eigenvectors.push_back(std::move(result.eigenvectors[i]));
    sorted.iterations_used.push_back(result.iterations_used[i]);
    sorted.residuals.push_back(result.residuals[i]);
    sorted.converged.push_back(result.converged[i]);
  }
  return sorted;
}

namespace detail {

double hutchinson_sample(const SymmetricOperator& op, const ProbeConfig& cfg,
                         int probe_index) {
  RngStream stream(cfg.seed, static_cast<std::uint64_t>(probe_index));
  const std::vector<double> v =
      sample_probe(op.dim(), cfg.distribution, stream);
  const std::vector<double> w = op.apply(v);
  return dot(v, w);
}

TraceEstimate assemble_trace(std::vector<double> samples) {
  TraceEstimate est;
  est.samples = std::move(samples);
  const std::size_t n = est.samples.size();
  est.running_means.resize(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += est.samples[i];
    est.running_means[i] = acc / static_cast<double>(i + 1);
  }
  est.mean = est.running_means.empty() ? 0.0 : est.running_means.back();
  if (n > 1) {
    double ss = 0.0;
    for (double x : est.samples) {
      const double d = x - est.mean;
      ss += d * d;
    }
    est.std_error =
        std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(double(n));
  }
  return est;
}

SlqRun slq_single_run(const SymmetricOperator& op, int q,
                      const ProbeConfig& cfg, int probe_index) {
  RngStream stream(cfg.seed, static_cast<std::uint64_t>(probe_index));
  std::vector<double> v = sample_probe(op.dim(), cfg.distribution, stream);
  const double n = norm2(v);
  for (double& x : v) x /= n;
  const int q_eff =
      std::min<int>(q, static_cast<int>(op.dim()));
  const LanczosOutput lo = lanczos(op, q_eff, v);
  return tridiag_eig(lo.alpha, lo.beta);
}

SpectralDensity assemble_density(std::vector<SlqRun> runs,
                                 const SlqOptions& options) {
  SpectralDensity density;
  density.runs = std::move(runs);

  double lmin = std::numeric_limits<double>::infinity();
  double lmax = -std::numeric_limits<double>::infinity();
  for (const SlqRun& run : density.runs) {
    for (double x : run.ritz_values) {
      lmin = std::min(lmin, x);
      lmax = std::max(lmax, x);
    }
  }
  const double width = lmax - lmin;
  density.sigma = options.sigma > 0.0
                      ? options.sigma
                      : std::max(0.01 * width, 1e-8);
  const double margin = std::max(3.0 * density.sigma, 0.01 * width);

  const int g = options.grid_points;
  density.grid.resize(g);
  density.values.assign(g, 0.0);
  const double lo = lmin - margin;
  const double hi = lmax + margin;
  const double step = (hi - lo) / static_cast<double>(g - 1);
  for (int i = 0; i < g; ++i) {
    density.grid[i] = lo + step * static_cast<double>(i);
  }

  const double inv_nv = 1.0 / static_cast<double>(density.runs.size());
  for (int i = 0; i < g; ++i) {
    const double t = density.grid[i];
    double acc = 0.0;
    for (const SlqRun& run : density.runs) {
      for (std::size_t j = 0; j < run.ritz_values.size(); ++j) {
        acc += run.weights[j] *
               gaussian_kernel(run.ritz_values[j], t, density.sigma);
      }
    }
    density.values[i] = acc * inv_nv;
  }
  return density;
}

}  // namespace detail

TraceEstimate hutchinson_trace(const SymmetricOperator& op,
                               const ProbeConfig& probes, int threads) {
  if (probes.count < 1) {
    throw std::invalid_argument("hutchinson_trace: probe count must be >= 1");
  }
  std::vector<double> samples(probes.count);
#pragma omp parallel for num_threads(std::max(threads, 1)) schedule(dynamic)
  for (int i = 0; i < probes.count; ++i) {
    samples[i] = detail::hutchinson_sample(op, probes, i);
  }
  return detail::assemble_trace(std::move(samples));
}

LanczosOutput lanczos(const SymmetricOperator& op, int q,
                      std::span<const double> start, bool keep_basis) {
  const std::size_t m = op.dim();
  if (q < 1 || static_cast<std::size_t>(q) > m) {
    throw std::invalid_argument("lanczos: q must be in [1, dim]");
  }
  if (start.size() != m) {
    throw std::invalid_argument("lanczos: start vector has wrong length");
  }
  if (std::fabs(norm2(start) - 1.0) > 1e-10) {
    throw std::invalid_argument("lanczos: start vector must be unit");
  }

  LanczosOutput out;
  std::vector<std::vector<double>> basis;
  basis.emplace_back(start.begin(), start.end());

  double run_max = 0.0;
  std::vector<double> w(m);
  for (int j = 0; j < q; ++j) {
    const std::vector<double>& v = basis.back();
    op.apply(v, w);
    const double a = dot(w, v);
    out.alpha.push_back(a);
    run_max = std::max(run_max, std::fabs(a));
    if (j == q - 1) break;

    for (std::size_t i = 0; i < m; ++i) w[i] -= a * v[i];
    if (j > 0) {
      const double b_prev = out.beta.back();
      const std::vector<double>& v_prev = basis[basis.size() - 2];
      for (std::size_t i = 0; i < m; ++i) w[i] -= b_prev * v_prev[i];
    }
    // Full reorthogonalization, two passes of modified Gram-Schmidt.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& u : basis) {
        const double c = dot(u, w);
        for (std::size_t i = 0; i < m; ++i) w[i] -= c * u[i];
      }
    }

    const double b = norm2(w);
    if (b <= 1e-10 * run_max) {
      out.breakdown = true;
      break;
    }
    out.beta.push_back(b);
    run_max = std::max(run_max, b);
    std::vector<double> next(m);
    for (std::size_t i = 0; i < m; ++i) next[i] = w[i] / b;
    basis.push_back(std::move(next));
  }

  out.steps_completed = static_cast<int>(out.alpha.size());
  if (keep_basis) out.basis = std::move(basis);
  return out;
}

SlqRun tridiag_eig(std::span<const double> alpha,
                   std::span<const double> beta) {
  const int q = static_cast<int>(alpha.size());
  if (q < 1) throw std::invalid_argument("tridiag_eig: empty alpha");
  if (beta.size() + 1 != alpha.size()) {
    throw std::invalid_argument("tridiag_eig: beta must have length q - 1");
  }

  std::vector<double> d(alpha.begin(), alpha.end());
  std::vector<double> e(q, 0.0);
  std::copy(beta.begin(), beta.end(), e.begin());  // e[q-1] stays 0
  std::vector<double> z(q, 0.0);  // first row of the eigenvector matrix
  z[0] = 1.0;

  const double eps = std::numeric_limits<double>::epsilon();
  for (int l = 0; l < q; ++l) {
    int iter = 0;
    int msub;
    do {
      for (msub = l; msub < q - 1; ++msub) {
        const double dd = std::fabs(d[msub]) + std::fabs(d[msub + 1]);
        if (std::fabs(e[msub]) <= eps * dd) break;
      }
      if (msub != l) {
        if (iter++ == 60) {
          throw std::runtime_error("tridiag_eig: QL did not converge");
        }
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[msub] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0;
        double c = 1.0;
        double p = 0.0;
        bool underflow = false;
        for (int i = msub - 1; i >= l; --i) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[msub] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          // Rotate the tracked first row (columns i, i+1).
          f = z[i + 1];
          z[i + 1] = s * z[i] + c * f;
          z[i] = c * z[i] - s * f;
        }
        if (underflow) continue;
        d[l] -= p;
        e[l] = g;
        e[msub] = 0.0;
      }
    } while (msub != l);
  }

  std::vector<std::size_t> idx(q);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });

  SlqRun run;
  run.ritz_values.reserve(q);
  run.weights.reserve(q);
  for (std::size_t i : idx) {
    run.ritz_values.push_back(d[i]);
    run.weights.push_back(z[i] * z[i]);
  }
  return run;
}

double gaussian_kernel(double lambda, double t, double sigma) {
  if (sigma <= 0.0) {
    throw std::invalid_argument("gaussian_kernel: sigma must be > 0");
  }
  const double u = (t - lambda) / sigma;
  return std::exp(-0.5 * u * u) / (sigma * std::sqrt(kTwoPi));
}

SpectralDensity slq_density(const SymmetricOperator& op,
                            const ProbeConfig& probes,
                            const SlqOptions& options) {
  if (probes.count < 1) {
    throw std::invalid_argument("slq_density: probe count must be >= 1");
  }
  if (options.q < 1) throw std::invalid_argument("slq_density: q must be >= 1");
  if (options.grid_points < 2) {
    throw std::invalid_argument("slq_density: grid needs at least 2 points");
  }

  std::vector<SlqRun> runs(probes.count);
#pragma omp parallel for num_threads(std::max(options.threads, 1)) \
    schedule(dynamic)
  for (int l = 0; l < probes.count; ++l) {
    runs[l] = detail::slq_single_run(op, options.q, probes, l);
  }
  return detail::assemble_density(std::move(runs), options);
}

}  // namespace hesskit
