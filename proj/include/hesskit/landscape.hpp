#pragma once

#include <span>
#include <utility>
#include <vector>

#include "hesskit/model.hpp"

namespace hesskit {

/// Loss over theta + eps1 v1 + eps2 v2 for a symmetric grid of
/// perturbation magnitudes, v1/v2 normally the top two Hessian
/// eigenvectors.
struct LandscapeGrid {
  std::vector<double> eps1_axis;  // ascending, 0 at the center
  std::vector<double> eps2_axis;
  std::vector<double> losses;     // row-major |eps1| x |eps2|
  double base_loss = 0.0;
  std::vector<double> v1, v2;     // unit directions
  int k_batch = 0;                // rows actually evaluated

  double at(int i, int j) const {
    return losses[std::size_t(i) * eps2_axis.size() + j];
  }
};

/// Evaluates losses[i][j] = L(theta + eps1[i] v1 + eps2[j] v2) on the full
/// batch truncated to k_batch rows. eps_range must be symmetric (lo ==
/// -hi) and resolution odd so 0 lands on both axes; the directions must be
/// unit and mutually orthogonal within 1e-6. Cells are independent and may
/// be evaluated in parallel; ordering is fixed by (i, j).
LandscapeGrid landscape(const ModelConfig& config, const ParamVector& params,
                        const Batch& batch, std::span<const double> v1,
                        std::span<const double> v2,
                        std::pair<double, double> eps_range = {-0.5, 0.5},
                        int resolution = 41, int k_batch = 4096,
                        int threads = 1);

namespace detail {
// Shared by the OpenMP kernel and the serial reference: validation, axes,
// batch truncation, base loss; losses are left unfilled.
LandscapeGrid landscape_prepare(const ModelConfig& config,
                                const ParamVector& params, const Batch& batch,
                                std::span<const double> v1,
                                std::span<const double> v2,
                                std::pair<double, double> eps_range,
                                int resolution, int k_batch, Batch* eval_out);
double landscape_cell(const ModelConfig& config, const ParamVector& params,
                      const Batch& eval, const LandscapeGrid& grid, int i,
                      int j);
}  // namespace detail

}  // namespace hesskit
