#include "hesskit/serial_ref.hpp"

#include <stdexcept>

namespace hesskit::serial {

TraceEstimate hutchinson_trace(const SymmetricOperator& op,
                               const ProbeConfig& probes) {
  if (probes.count < 1) {
    throw std::invalid_argument("hutchinson_trace: probe count must be >= 1");
  }
  std::vector<double> samples(probes.count);
  for (int i = 0; i < probes.count; ++i) {
    samples[i] = detail::hutchinson_sample(op, probes, i);
  }
  return detail::assemble_trace(std::move(samples));
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
  for (int l = 0; l < probes.count; ++l) {
    runs[l] = detail::slq_single_run(op, options.q, probes, l);
  }
  return detail::assemble_density(std::move(runs), options);
}

Materialized materialize(const SymmetricOperator& op, std::size_t cap) {
  const std::size_t m = op.dim();
  if (m > cap) {
    throw std::invalid_argument(
        "materialize: refusing dimension above the cap");
  }
  DenseMatrix raw(m);
  for (std::size_t j = 0; j < m; ++j) {
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

LandscapeGrid landscape(const ModelConfig& config, const ParamVector& params,
                        const Batch& batch, std::span<const double> v1,
                        std::span<const double> v2,
                        std::pair<double, double> eps_range, int resolution,
                        int k_batch) {
  Batch eval;
  LandscapeGrid grid = hesskit::detail::landscape_prepare(
      config, params, batch, v1, v2, eps_range, resolution, k_batch, &eval);
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      grid.losses[std::size_t(i) * resolution + j] =
          hesskit::detail::landscape_cell(config, params, eval, grid, i, j);
    }
  }
  return grid;
}

}  // namespace hesskit::serial
