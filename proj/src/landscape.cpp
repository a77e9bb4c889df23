#include "hesskit/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hesskit {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

namespace detail {

LandscapeGrid landscape_prepare(const ModelConfig& config,
                                const ParamVector& params, const Batch& batch,
                                std::span<const double> v1,
                                std::span<const double> v2,
                                std::pair<double, double> eps_range,
                                int resolution, int k_batch,
                                Batch* eval_out) {
  const std::size_t m = params.values.size();
  if (v1.size() != m || v2.size() != m) {
    throw std::invalid_argument("landscape: direction length != param count");
  }
  if (resolution < 3 || resolution % 2 == 0) {
    throw std::invalid_argument("landscape: resolution must be odd and >= 3");
  }
  if (!(eps_range.second > 0.0) || eps_range.first != -eps_range.second) {
    throw std::invalid_argument(
        "landscape: eps_range must be symmetric about 0 with hi > 0");
  }
  if (std::fabs(std::sqrt(dot(v1, v1)) - 1.0) > 1e-6 ||
      std::fabs(std::sqrt(dot(v2, v2)) - 1.0) > 1e-6) {
    throw std::invalid_argument("landscape: directions must be unit");
  }
  if (std::fabs(dot(v1, v2)) > 1e-6) {
    throw std::invalid_argument("landscape: directions must be orthogonal");
  }
  if (k_batch < 1) {
    throw std::invalid_argument("landscape: k_batch must be >= 1");
  }

  Batch& eval = *eval_out;
  eval = batch;
  if (batch.n > k_batch) {
    eval.n = k_batch;
    eval.inputs.assign(batch.inputs.begin(),
                       batch.inputs.begin() +
                           std::size_t(k_batch) * batch.input_dim);
    eval.targets.assign(batch.targets.begin(),
                        batch.targets.begin() +
                            std::size_t(k_batch) * batch.output_dim);
  }

  LandscapeGrid grid;
  grid.v1.assign(v1.begin(), v1.end());
  grid.v2.assign(v2.begin(), v2.end());
  grid.k_batch = eval.n;

  // Axes built as (i - center) * step so 0 is exact and +-pairs negate
  // exactly.
  const int center = (resolution - 1) / 2;
  const double step = eps_range.second / double(center);
  grid.eps1_axis.resize(resolution);
  grid.eps2_axis.resize(resolution);
  for (int i = 0; i < resolution; ++i) {
    grid.eps1_axis[i] = double(i - center) * step;
    grid.eps2_axis[i] = double(i - center) * step;
  }

  grid.base_loss = forward_loss(config, params, eval);
  grid.losses.resize(std::size_t(resolution) * resolution);
  return grid;
}

double landscape_cell(const ModelConfig& config, const ParamVector& params,
                      const Batch& eval, const LandscapeGrid& grid, int i,
                      int j) {
  const std::size_t m = params.values.size();
  const double e1 = grid.eps1_axis[i];
  const double e2 = grid.eps2_axis[j];
  ParamVector shifted{std::vector<double>(m), params.layout};
  for (std::size_t k = 0; k < m; ++k) {
    shifted.values[k] = params.values[k] + e1 * grid.v1[k] + e2 * grid.v2[k];
  }
  return forward_loss(config, shifted, eval);
}

}  // namespace detail

LandscapeGrid landscape(const ModelConfig& config, const ParamVector& params,
                        const Batch& batch, std::span<const double> v1,
                        std::span<const double> v2,
                        std::pair<double, double> eps_range, int resolution,
                        int k_batch, int threads) {
  Batch eval;
  LandscapeGrid grid =
      detail::landscape_prepare(config, params, batch, v1, v2, eps_range,
                                resolution, k_batch, &eval);
  const int cells = resolution * resolution;
#pragma omp parallel for num_threads(std::max(threads, 1)) schedule(dynamic)
  for (int cell = 0; cell < cells; ++cell) {
    grid.losses[cell] = detail::landscape_cell(
        config, params, eval, grid, cell / resolution, cell % resolution);
  }
  return grid;
}

}  // namespace hesskit
