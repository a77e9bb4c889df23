#include <stdexcept>

#include "doctest.h"
#include "hesskit/landscape.hpp"
#include "hesskit/serial_ref.hpp"
#include "hesskit/spectral.hpp"
#include "test_support.hpp"

using namespace hesskit;
namespace ht = hesskit::testing;

namespace {

// Same rig as the model tests: linear model whose loss is exactly
// 0.5 (a w1^2 + b w2^2 + 2 bias^2).
struct Rig {
  ModelConfig config;
  Batch batch;
  BlockLayout layout;
};

Rig make_rig(double a, double b) {
  Rig rig;
  rig.config.input_dim = 2;
  rig.config.output_dim = 1;
  rig.config.loss = LossKind::kMse;
  const double s1 = std::sqrt(a / 2.0);
  const double s2 = std::sqrt(b / 2.0);
  rig.batch.n = 4;
  rig.batch.input_dim = 2;
  rig.batch.output_dim = 1;
  rig.batch.inputs = {s1, s2, -s1, s2, s1, -s2, -s1, -s2};
  rig.batch.targets = {0.0, 0.0, 0.0, 0.0};
  rig.layout = make_layout(rig.config);
  return rig;
}

}  // namespace

TEST_CASE("the center cell equals the base loss exactly") {
  const Rig rig = make_rig(2.0, 1.0);
  const ParamVector theta{{0.31, -0.6, 0.2}, rig.layout};
  const std::vector<double> v1{1.0, 0.0, 0.0};
  const std::vector<double> v2{0.0, 1.0, 0.0};
  const LandscapeGrid grid = landscape(rig.config, theta, rig.batch, v1, v2,
                                       {-0.5, 0.5}, 11);
  const int c = 5;
  CHECK(grid.eps1_axis[c] == 0.0);
  CHECK(grid.eps2_axis[c] == 0.0);
  CHECK(grid.at(c, c) == grid.base_loss);
}

TEST_CASE("rigged paraboloid: losses are 0.5 (a e1^2 + b e2^2) exactly") {
  const double a = 3.0;
  const double b = 0.5;
  const Rig rig = make_rig(a, b);
  const ParamVector theta{{0.0, 0.0, 0.0}, rig.layout};
  const std::vector<double> v1{1.0, 0.0, 0.0};
  const std::vector<double> v2{0.0, 1.0, 0.0};
  const LandscapeGrid grid = landscape(rig.config, theta, rig.batch, v1, v2,
                                       {-0.5, 0.5}, 21);
  for (std::size_t i = 0; i < grid.eps1_axis.size(); ++i) {
    for (std::size_t j = 0; j < grid.eps2_axis.size(); ++j) {
      const double e1 = grid.eps1_axis[i];
      const double e2 = grid.eps2_axis[j];
      const double want = 0.5 * (a * e1 * e1 + b * e2 * e2);
      REQUIRE(std::fabs(grid.at(int(i), int(j)) - want) <= 1e-12);
    }
  }
}

TEST_CASE("fitted curvature equals the Rayleigh quotient on rigged models") {
  const double a = 4.0;
  const double b = 1.5;
  const Rig rig = make_rig(a, b);
  const ParamVector theta{{0.0, 0.0, 0.0}, rig.layout};
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  // Rotated plane: Rayleigh quotients are the averaged curvatures.
  const std::vector<double> v1{inv_sqrt2, inv_sqrt2, 0.0};
  const std::vector<double> v2{inv_sqrt2, -inv_sqrt2, 0.0};
  const LandscapeGrid grid = landscape(rig.config, theta, rig.batch, v1, v2,
                                       {-0.2, 0.2}, 5);
  const int c = 2;
  const double h = grid.eps1_axis[3] - grid.eps1_axis[2];
  const double along1 =
      (grid.at(c + 1, c) - 2.0 * grid.at(c, c) + grid.at(c - 1, c)) / (h * h);
  const double along2 =
      (grid.at(c, c + 1) - 2.0 * grid.at(c, c) + grid.at(c, c - 1)) / (h * h);
  const double rayleigh = 0.5 * (a + b);  // v^T H v for both directions
  CHECK(std::fabs(along1 - rayleigh) <= 1e-8);
  CHECK(std::fabs(along2 - rayleigh) <= 1e-8);
}

TEST_CASE("grid symmetry for an even loss") {
  const Rig rig = make_rig(2.5, 0.75);
  const ParamVector theta{{0.0, 0.0, 0.0}, rig.layout};
  const std::vector<double> v1{1.0, 0.0, 0.0};
  const std::vector<double> v2{0.0, 1.0, 0.0};
  const LandscapeGrid grid = landscape(rig.config, theta, rig.batch, v1, v2,
                                       {-0.4, 0.4}, 9);
  const int r = 8;
  for (int i = 0; i <= r; ++i) {
    for (int j = 0; j <= r; ++j) {
      REQUIRE(std::fabs(grid.at(i, j) - grid.at(r - i, r - j)) <= 1e-10);
    }
  }
}

TEST_CASE("curvature along the top eigenvector approximates lambda1") {
  // Train a small MLP to a flat-gradient point, take the top two Hessian
  // eigenvectors, and compare the grid's second difference against
  // lambda1.
  const Batch data = make_dataset(DatasetKind::kTwoGaussians, 60, 0.25, 7);
  ModelConfig c;
  c.input_dim = 2;
  c.output_dim = 2;
  c.hidden = {6};
  c.loss = LossKind::kCrossEntropy;
  ParamVector theta = init_params(c, 8);
  theta = train_gradient_descent(c, theta, data, 1500, 0.25, 0.9);

  const SymmetricOperator h = hessian_operator(c, theta, data);
  const EigenResult top = top_eigenpairs(h, 2, 1e-9, 5000, 9);
  REQUIRE(top.converged[0]);
  REQUIRE(top.converged[1]);

  const LandscapeGrid grid =
      landscape(c, theta, data, top.eigenvectors[0], top.eigenvectors[1],
                {-0.05, 0.05}, 11);
  const int mid = 5;
  const double step = grid.eps1_axis[mid + 1] - grid.eps1_axis[mid];
  const double second_diff =
      (grid.at(mid + 1, mid) - 2.0 * grid.at(mid, mid) +
       grid.at(mid - 1, mid)) /
      (step * step);
  CHECK(ht::rel_err(second_diff, top.eigenvalues[0]) < 0.10);
}

TEST_CASE("landscape validates its inputs") {
  const Rig rig = make_rig(1.0, 1.0);
  const ParamVector theta{{0.0, 0.0, 0.0}, rig.layout};
  const std::vector<double> v1{1.0, 0.0, 0.0};
  const std::vector<double> v2{0.0, 1.0, 0.0};
  const std::vector<double> not_unit{0.5, 0.0, 0.0};
  const std::vector<double> not_orth{1.0, 0.0, 0.0};

  CHECK_THROWS_AS(landscape(rig.config, theta, rig.batch, v1, v2,
                            {-0.5, 0.5}, 10),
                  std::invalid_argument);  // even resolution
  CHECK_THROWS_AS(landscape(rig.config, theta, rig.batch, v1, v2,
                            {-0.3, 0.5}, 11),
                  std::invalid_argument);  // asymmetric range
  CHECK_THROWS_AS(landscape(rig.config, theta, rig.batch, not_unit, v2,
                            {-0.5, 0.5}, 11),
                  std::invalid_argument);
  CHECK_THROWS_AS(landscape(rig.config, theta, rig.batch, v1, not_orth,
                            {-0.5, 0.5}, 11),
                  std::invalid_argument);
}

TEST_CASE("landscape truncates the batch to k rows") {
  const Batch data = make_dataset(DatasetKind::kTwoGaussians, 40, 0.2, 31);
  ModelConfig c;
  c.input_dim = 2;
  c.output_dim = 2;
  c.hidden = {4};
  c.loss = LossKind::kMse;
  const ParamVector theta = init_params(c, 32);
  const std::size_t m = theta.values.size();
  std::vector<double> v1(m, 0.0);
  std::vector<double> v2(m, 0.0);
  v1[0] = 1.0;
  v2[1] = 1.0;
  const LandscapeGrid grid =
      landscape(c, theta, data, v1, v2, {-0.1, 0.1}, 5, /*k_batch=*/16);
  CHECK(grid.k_batch == 16);
}

TEST_CASE("landscape is identical across serial and threaded evaluation") {
  const Batch data = make_dataset(DatasetKind::kRing, 30, 0.1, 41);
  ModelConfig c;
  c.input_dim = 2;
  c.output_dim = 2;
  c.hidden = {5};
  c.loss = LossKind::kCrossEntropy;
  const ParamVector theta = init_params(c, 42);
  const std::size_t m = theta.values.size();
  std::vector<double> v1(m, 0.0);
  std::vector<double> v2(m, 0.0);
  v1[2] = 1.0;
  v2[3] = 1.0;

  const LandscapeGrid serial =
      serial::landscape(c, theta, data, v1, v2, {-0.2, 0.2}, 9);
  const LandscapeGrid par =
      landscape(c, theta, data, v1, v2, {-0.2, 0.2}, 9, 4096, 4);
  CHECK(serial.losses == par.losses);
  CHECK(serial.base_loss == par.base_loss);
  CHECK(serial.eps1_axis == par.eps1_axis);
}
