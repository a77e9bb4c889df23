#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hesskit/rng.hpp"
#include "hesskit/symmetric_operator.hpp"

namespace hesskit {

enum class ProbeDistribution { kRademacher, kGaussian };

struct ProbeConfig {
  ProbeDistribution distribution = ProbeDistribution::kRademacher;
  std::uint64_t seed = 0;
  int count = 1;  // n_v
};

/// Draws a length-dim probe from the stream: Rademacher entries are i.i.d.
/// +-1, Gaussian entries i.i.d. standard normal.
std::vector<double> sample_probe(std::size_t dim, ProbeDistribution dist,
                                 RngStream& stream);

struct EigenResult {
  std::vector<double> eigenvalues;  // sorted descending by |lambda|
  std::vector<std::vector<double>> eigenvectors;  // unit, same order
  std::vector<int> iterations_used;
  std::vector<double> residuals;  // ||H u - lambda u|| at acceptance
  std::vector<bool> converged;    // false when max_iter stopped the pair
};

/// Deflated power iteration for the k eigenvalues largest in magnitude.
/// Pair j runs power iteration on op deflated against the previously
/// accepted eigenvectors; a pair is accepted once the relative Rayleigh
/// quotient change drops below tol and the residual is at most tol (or at
/// max_iter, recorded in `converged`). When an eigenvalue is repeated the
/// returned vectors span the right subspace but are individually
/// basis-arbitrary.
EigenResult top_eigenpairs(const SymmetricOperator& op, int k,
                           double tol = 1e-6, int max_iter = 1000,
                           std::uint64_t seed = 0);

struct TraceEstimate {
  std::vector<double> samples;        // v_i^T H v_i, probe-index order
  double mean = 0.0;                  // arithmetic mean of samples
  std::vector<double> running_means;  // running_means[i] uses samples 0..i
  double std_error = 0.0;             // sample stddev / sqrt(n_v)
};

/// Hutchinson trace estimator Tr(H) ~ E[v^T H v]. Probe i draws from the
/// substream (seed, i), so samples are bit-identical for any thread count.
TraceEstimate hutchinson_trace(const SymmetricOperator& op,
                               const ProbeConfig& probes, int threads = 1);

struct LanczosOutput {
  std::vector<double> alpha;  // diagonal of T
  std::vector<double> beta;   // off-diagonal of T
  int steps_completed = 0;
  bool breakdown = false;
  std::vector<std::vector<double>> basis;  // Krylov basis, if requested
};

/// q-step Lanczos with full reorthogonalization against all previous basis
/// vectors. Declares breakdown when the new off-diagonal drops below
/// 1e-10 times the running max of |alpha|,|beta| (the Krylov space is
/// exhausted) and truncates.
LanczosOutput lanczos(const SymmetricOperator& op, int q,
                      std::span<const double> start, bool keep_basis = false);

struct SlqRun {
  std::vector<double> ritz_values;  // descending
  std::vector<double> weights;      // squared first eigenvector components
};

/// Eigenvalues of the symmetric tridiagonal T(alpha, beta) plus the squared
/// first components of its orthonormal eigenvectors (the Gauss quadrature
/// weights). Implicit-shift QL accumulating only the first eigenvector row.
SlqRun tridiag_eig(std::span<const double> alpha,
                   std::span<const double> beta);

/// f(lambda; t, sigma) = exp(-(t-lambda)^2 / (2 sigma^2)) / (sigma sqrt(2 pi))
double gaussian_kernel(double lambda, double t, double sigma);

struct SpectralDensity {
  std::vector<double> grid;    // ascending evaluation points t
  std::vector<double> values;  // phi_sigma(t) >= 0
  double sigma = 0.0;
  std::vector<SlqRun> runs;    // one per probe; empty for exact densities
};

struct SlqOptions {
  int q = 64;
  double sigma = -1.0;  // <= 0 selects automatic width
  int grid_points = 1024;
  int threads = 1;
};

/// Stochastic Lanczos Quadrature density: for each of n_v probes run
/// Lanczos from the normalized probe, eigendecompose the tridiagonal
/// matrix, and average the Gaussian-smoothed quadrature rules
///   phi_sigma(t) ~ (1/n_v) sum_l sum_i tau_i^(l) f(ritz_i^(l); t, sigma)
/// over a grid spanning all Ritz values plus a margin. Automatic sigma is
/// 1% of the observed Ritz spread (floor 1e-8); the margin is
/// max(3 sigma, 1% of the spread). Deterministic for a fixed seed.
SpectralDensity slq_density(const SymmetricOperator& op,
                            const ProbeConfig& probes,
                            const SlqOptions& options = {});

namespace detail {
// Per-probe workers shared by the OpenMP kernels and the serial reference.
double hutchinson_sample(const SymmetricOperator& op, const ProbeConfig& cfg,
                         int probe_index);
SlqRun slq_single_run(const SymmetricOperator& op, int q,
                      const ProbeConfig& cfg, int probe_index);
TraceEstimate assemble_trace(std::vector<double> samples);
SpectralDensity assemble_density(std::vector<SlqRun> runs,
                                 const SlqOptions& options);
}  // namespace detail

}  // namespace hesskit
