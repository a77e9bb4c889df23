// Compares the OpenMP kernels against the serial reference on a dense
// synthetic operator: wall time per kernel and a byte-identity check of
// the outputs.

#include <chrono>
#include <cstdio>
#include <vector>

#include "CLI11.hpp"

#include "hesskit/rng.hpp"
#include "hesskit/serial_ref.hpp"
#include "hesskit/spectral.hpp"

using namespace hesskit;

namespace {

template <typename F>
double time_of(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

DenseMatrix random_symmetric(std::size_t m, std::uint64_t seed) {
  RngStream stream(seed, 0);
  DenseMatrix a(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      const double x = stream.next_gaussian();
      a.at(i, j) = x;
      a.at(j, i) = x;
    }
  }
  return a;
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t m = 600;
  int n_v = 128;
  int q = 48;
  std::vector<int> thread_counts{2, 4};
  CLI::App app{"serial vs OpenMP kernel comparison"};
  app.add_option("--m", m, "operator dimension");
  app.add_option("--n-v", n_v, "probe count");
  app.add_option("--q", q, "Lanczos steps");
  app.add_option("--threads", thread_counts, "thread counts to try")
      ->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const SymmetricOperator op = dense_operator(random_symmetric(m, 7));
  ProbeConfig probes;
  probes.seed = 11;
  probes.count = n_v;
  SlqOptions slq;
  slq.q = q;

  std::printf("operator: dense %zux%zu, n_v=%d, q=%d\n", m, m, n_v, q);

  TraceEstimate trace_ref;
  const double t_trace_ref =
      time_of([&] { trace_ref = serial::hutchinson_trace(op, probes); });
  std::printf("%-28s %8.3f s\n", "hutchinson serial", t_trace_ref);
  for (int t : thread_counts) {
    TraceEstimate est;
    const double dt = time_of([&] { est = hutchinson_trace(op, probes, t); });
    const bool same = est.samples == trace_ref.samples;
    std::printf("%-21s (t=%2d) %8.3f s  speedup %4.2fx  %s\n",
                "hutchinson omp", t, dt, t_trace_ref / dt,
                same ? "outputs identical" : "OUTPUTS DIFFER");
    if (!same) return 1;
  }

  SpectralDensity density_ref;
  const double t_slq_ref =
      time_of([&] { density_ref = serial::slq_density(op, probes, slq); });
  std::printf("%-28s %8.3f s\n", "slq density serial", t_slq_ref);
  for (int t : thread_counts) {
    SlqOptions opts = slq;
    opts.threads = t;
    SpectralDensity density;
    const double dt = time_of([&] { density = slq_density(op, probes, opts); });
    bool same = density.values == density_ref.values &&
                density.grid == density_ref.grid;
    for (std::size_t l = 0; same && l < density.runs.size(); ++l) {
      same = density.runs[l].ritz_values == density_ref.runs[l].ritz_values &&
             density.runs[l].weights == density_ref.runs[l].weights;
    }
    std::printf("%-21s (t=%2d) %8.3f s  speedup %4.2fx  %s\n",
                "slq density omp", t, dt, t_slq_ref / dt,
                same ? "outputs identical" : "OUTPUTS DIFFER");
    if (!same) return 1;
  }

  Materialized mat_ref;
  const double t_mat_ref =
      time_of([&] { mat_ref = serial::materialize(op, m); });
  std::printf("%-28s %8.3f s\n", "materialize serial", t_mat_ref);
  for (int t : thread_counts) {
    Materialized mat;
    const double dt = time_of([&] { mat = materialize(op, m, t); });
    bool same = mat.asymmetry == mat_ref.asymmetry;
    const auto a = mat.matrix.data();
    const auto b = mat_ref.matrix.data();
    for (std::size_t i = 0; same && i < a.size(); ++i) same = a[i] == b[i];
    std::printf("%-21s (t=%2d) %8.3f s  speedup %4.2fx  %s\n",
                "materialize omp", t, dt, t_mat_ref / dt,
                same ? "outputs identical" : "OUTPUTS DIFFER");
    if (!same) return 1;
  }

  return 0;
}
