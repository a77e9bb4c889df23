#include <algorithm>
#include <stdexcept>

#include "doctest.h"
#include "hesskit/model.hpp"
#include "hesskit/oracle.hpp"
#include "hesskit/spectral.hpp"
#include "test_support.hpp"

using namespace hesskit;
namespace ht = hesskit::testing;

namespace {

// Linear model (no hidden layers) whose MSE loss is exactly the quadratic
// 0.5 (a w1^2 + b w2^2 + 2 bias^2): design columns are sign patterns
// orthogonal to each other and to the all-ones bias column, targets zero.
struct RiggedQuadratic {
  ModelConfig config;
  Batch batch;
  std::vector<double> curvature;  // diagonal of the Hessian: (a, b, 2)
};

RiggedQuadratic make_rigged_quadratic(double a, double b) {
  RiggedQuadratic rig;
  rig.config.input_dim = 2;
  rig.config.output_dim = 1;
  rig.config.loss = LossKind::kMse;

  const double s1 = std::sqrt(a / 2.0);
  const double s2 = std::sqrt(b / 2.0);
  rig.batch.n = 4;
  rig.batch.input_dim = 2;
  rig.batch.output_dim = 1;
  rig.batch.inputs = {s1,  s2,   //
                      -s1, s2,   //
                      s1,  -s2,  //
                      -s1, -s2};
  rig.batch.targets = {0.0, 0.0, 0.0, 0.0};
  rig.curvature = {a, b, 2.0};
  return rig;
}

ModelConfig toy_config(Activation act, LossKind loss, bool norm,
                       bool residual) {
  ModelConfig c;
  c.input_dim = 3;
  c.output_dim = 2;
  c.hidden = {4, 4};
  c.activation = act;
  c.loss = loss;
  c.norm = {norm, norm};
  c.residual = {false, residual};  // layer 0 is 3 -> 4, no skip possible
  return c;
}

Batch toy_batch(const ModelConfig& c, int n, std::uint64_t seed) {
  RngStream stream(seed, 0);
  Batch b;
  b.n = n;
  b.input_dim = c.input_dim;
  b.output_dim = c.output_dim;
  b.inputs.resize(std::size_t(n) * c.input_dim);
  for (double& x : b.inputs) x = stream.next_gaussian();
  b.targets.assign(std::size_t(n) * c.output_dim, 0.0);
  for (int i = 0; i < n; ++i) {
    if (c.loss == LossKind::kCrossEntropy) {
      const int cls = int(stream.next_u64() % std::uint64_t(c.output_dim));
      b.targets[std::size_t(i) * c.output_dim + cls] = 1.0;
    } else {
      for (int j = 0; j < c.output_dim; ++j) {
        b.targets[std::size_t(i) * c.output_dim + j] = stream.next_gaussian();
      }
    }
  }
  return b;
}

ParamVector fd_gradient(const ModelConfig& c, const ParamVector& params,
                        const Batch& batch, double eps) {
  ParamVector g{std::vector<double>(params.values.size()), params.layout};
  ParamVector work = params;
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    work.values[i] = params.values[i] + eps;
    const double fp = forward_loss(c, work, batch);
    work.values[i] = params.values[i] - eps;
    const double fm = forward_loss(c, work, batch);
    work.values[i] = params.values[i];
    g.values[i] = (fp - fm) / (2.0 * eps);
  }
  return g;
}

}  // namespace

TEST_CASE("parameter counting matches the layer shapes") {
  ModelConfig c;
  c.input_dim = 2;
  c.output_dim = 1;
  c.hidden = {4};
  CHECK(param_count(c) == 17);  // 2*4 + 4 + 4*1 + 1
  c.norm = {true};
  CHECK(param_count(c) == 25);  // + scale and shift on the hidden layer
}

TEST_CASE("init_params is deterministic and respects the defaults") {
  ModelConfig c;
  c.input_dim = 2;
  c.output_dim = 1;
  c.hidden = {4};
  c.norm = {true};
  const ParamVector p1 = init_params(c, 9);
  const ParamVector p2 = init_params(c, 9);
  CHECK(p1.values == p2.values);

  const Segment& bias = p1.layout.find("layer0.bias");
  for (std::size_t i = 0; i < bias.length; ++i) {
    CHECK(p1.values[bias.offset + i] == 0.0);
  }
  const Segment& scale = p1.layout.find("layer0.norm_scale");
  for (std::size_t i = 0; i < scale.length; ++i) {
    CHECK(p1.values[scale.offset + i] == 1.0);
  }
  const Segment& w = p1.layout.find("layer0.weight");
  const double s = std::sqrt(6.0 / (2 + 4));
  for (std::size_t i = 0; i < w.length; ++i) {
    CHECK(std::fabs(p1.values[w.offset + i]) < s);
  }
}

TEST_CASE("residual layers require matching widths") {
  ModelConfig c;
  c.input_dim = 3;
  c.output_dim = 2;
  c.hidden = {4};
  c.residual = {true};
  CHECK_THROWS_AS(validate_config(c), std::invalid_argument);
}

TEST_CASE("an exactly-fitting linear model has zero loss and gradient") {
  ModelConfig c;
  c.input_dim = 1;
  c.output_dim = 1;
  c.hidden = {};
  Batch b;
  b.n = 2;
  b.input_dim = 1;
  b.output_dim = 1;
  b.inputs = {1.0, 2.0};
  b.targets = {2.0, 4.0};
  const ParamVector theta{{2.0, 0.0}, make_layout(c)};
  CHECK(forward_loss(c, theta, b) == 0.0);
  const ParamVector g = gradient(c, theta, b);
  for (double x : g.values) CHECK(std::fabs(x) <= 1e-12);
}

TEST_CASE("cross entropy of uniform logits is ln C") {
  ModelConfig c;
  c.input_dim = 2;
  c.output_dim = 3;
  c.hidden = {};
  c.loss = LossKind::kCrossEntropy;
  const ParamVector zero{std::vector<double>(param_count(c), 0.0),
                         make_layout(c)};
  Batch b;
  b.n = 4;
  b.input_dim = 2;
  b.output_dim = 3;
  b.inputs = {0.3, -0.2, 1.0, 0.5, -0.7, 0.1, 0.0, 2.0};
  b.targets = {1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0};
  CHECK(std::fabs(forward_loss(c, zero, b) - std::log(3.0)) < 1e-14);
}

TEST_CASE("cross entropy rejects non-normalized targets") {
  ModelConfig c;
  c.input_dim = 2;
  c.output_dim = 2;
  c.hidden = {};
  c.loss = LossKind::kCrossEntropy;
  const ParamVector zero{std::vector<double>(param_count(c), 0.0),
                         make_layout(c)};
  Batch b;
  b.n = 1;
  b.input_dim = 2;
  b.output_dim = 2;
  b.inputs = {1.0, 1.0};
  b.targets = {0.5, 0.2};
  CHECK_THROWS_AS(forward_loss(c, zero, b), std::invalid_argument);
}

TEST_CASE("shape mismatches are rejected") {
  ModelConfig c;
  c.input_dim = 2;
  c.output_dim = 1;
  c.hidden = {3};
  const ParamVector p = init_params(c, 1);
  Batch b;
  b.n = 2;
  b.input_dim = 3;  // wrong
  b.output_dim = 1;
  b.inputs = {1, 2, 3, 4, 5, 6};
  b.targets = {0, 0};
  CHECK_THROWS_AS(forward_loss(c, p, b), std::invalid_argument);
}

TEST_CASE("rigged quadratic: gradient is A theta and hvp is A v") {
  const RiggedQuadratic rig = make_rigged_quadratic(3.0, 0.5);
  const BlockLayout layout = make_layout(rig.config);
  const ParamVector theta{{0.7, -1.2, 0.4}, layout};

  const ParamVector g = gradient(rig.config, theta, rig.batch);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::fabs(g.values[i] - rig.curvature[i] * theta.values[i]) <=
          1e-12);
  }

  const ParamVector v{{-0.3, 2.0, 1.1}, layout};
  const ParamVector hv = hvp(rig.config, theta, rig.batch, v);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::fabs(hv.values[i] - rig.curvature[i] * v.values[i]) <= 1e-12);
  }
}

TEST_CASE("gradient matches finite differences for every flag combination") {
  for (Activation act :
       {Activation::kTanh, Activation::kSigmoid, Activation::kSoftplus}) {
    for (LossKind loss : {LossKind::kMse, LossKind::kCrossEntropy}) {
      for (bool norm : {false, true}) {
        for (bool residual : {false, true}) {
          const ModelConfig c = toy_config(act, loss, norm, residual);
          const Batch b = toy_batch(c, 8, 77);
          const ParamVector p = init_params(c, 78);
          const ParamVector g = gradient(c, p, b);
          const ParamVector fd = fd_gradient(c, p, b, 1e-5);

          double scale = 1e-12;
          for (double x : g.values) scale = std::max(scale, std::fabs(x));
          for (std::size_t i = 0; i < g.values.size(); ++i) {
            REQUIRE(std::fabs(g.values[i] - fd.values[i]) <= 1e-6 * scale);
          }
        }
      }
    }
  }
}

TEST_CASE("hvp agrees with the finite-difference oracle on a toy MLP") {
  ModelConfig c = toy_config(Activation::kTanh, LossKind::kMse, true, true);
  c.hidden = {6, 6};
  c.norm = {true, true};
  c.residual = {false, true};
  const Batch b = toy_batch(c, 16, 81);
  const ParamVector p = init_params(c, 82);
  const std::size_t m = p.values.size();
  REQUIRE(m >= 90);  // toy scale, roughly a hundred parameters

  const GradientFn grad_fn = [&](std::span<const double> theta) {
    const ParamVector pt{{theta.begin(), theta.end()}, p.layout};
    return gradient(c, pt, b).values;
  };

  RngStream stream(83, 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v = sample_probe(m, ProbeDistribution::kGaussian, stream);
    const double n = ht::norm2(v);
    for (double& x : v) x /= n;

    const ParamVector hv = hvp(c, p, b, ParamVector{v, p.layout});
    const std::vector<double> fd = fd_hvp(grad_fn, p.values, v, 1e-4);

    double diff2 = 0.0;
    double ref2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double d = hv.values[i] - fd[i];
      diff2 += d * d;
      ref2 += hv.values[i] * hv.values[i];
    }
    REQUIRE(std::sqrt(diff2) <= 1e-4 * std::sqrt(ref2));
  }
}

TEST_CASE("hvp is linear and symmetric") {
  const ModelConfig c =
      toy_config(Activation::kSoftplus, LossKind::kCrossEntropy, true, false);
  const Batch b = toy_batch(c, 12, 91);
  const ParamVector p = init_params(c, 92);
  const std::size_t m = p.values.size();

  RngStream stream(93, 0);
  const auto draw = [&]() {
    return sample_probe(m, ProbeDistribution::kGaussian, stream);
  };

  // Linearity: hvp(a v1 + b v2) = a hvp(v1) + b hvp(v2).
  const std::vector<double> v1 = draw();
  const std::vector<double> v2 = draw();
  const double ca = 0.6;
  const double cb = -1.7;
  std::vector<double> mix(m);
  for (std::size_t i = 0; i < m; ++i) mix[i] = ca * v1[i] + cb * v2[i];
  const auto h1 = hvp(c, p, b, ParamVector{v1, p.layout}).values;
  const auto h2 = hvp(c, p, b, ParamVector{v2, p.layout}).values;
  const auto hmix = hvp(c, p, b, ParamVector{mix, p.layout}).values;
  double diff2 = 0.0;
  double ref2 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double want = ca * h1[i] + cb * h2[i];
    diff2 += (hmix[i] - want) * (hmix[i] - want);
    ref2 += want * want;
  }
  CHECK(std::sqrt(diff2) <= 1e-10 * std::sqrt(ref2));

  // Symmetry over random pairs.
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<double> a = draw();
    const std::vector<double> d = draw();
    const double x = ht::dot(a, hvp(c, p, b, ParamVector{d, p.layout}).values);
    const double y = ht::dot(d, hvp(c, p, b, ParamVector{a, p.layout}).values);
    REQUIRE(std::fabs(x - y) <=
            1e-8 * std::max({std::fabs(x), std::fabs(y), 1e-12}));
  }
}

TEST_CASE("hvp validates the layout of v") {
  const RiggedQuadratic rig = make_rigged_quadratic(1.0, 1.0);
  const BlockLayout layout = make_layout(rig.config);
  const ParamVector theta{{0.0, 0.0, 0.0}, layout};
  const ParamVector bad{{0.0, 0.0, 0.0},
                        BlockLayout::single("everything", 3)};
  CHECK_THROWS_AS(hvp(rig.config, theta, rig.batch, bad),
                  std::invalid_argument);
}

TEST_CASE("hessian operator is symmetric and matches the dense oracle") {
  ModelConfig c = toy_config(Activation::kTanh, LossKind::kCrossEntropy,
                             false, true);
  const Batch b = toy_batch(c, 16, 101);
  const ParamVector p = init_params(c, 102);
  const SymmetricOperator h = hessian_operator(c, p, b);
  REQUIRE(h.dim() == p.values.size());
  REQUIRE(h.layout().has_value());

  RngStream stream(103, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto v1 = sample_probe(h.dim(), ProbeDistribution::kGaussian, stream);
    const auto v2 = sample_probe(h.dim(), ProbeDistribution::kGaussian, stream);
    const double x = ht::dot(v1, h.apply(v2));
    const double y = ht::dot(v2, h.apply(v1));
    REQUIRE(std::fabs(x - y) <=
            1e-8 * std::max({std::fabs(x), std::fabs(y), 1e-12}));
  }

  const Materialized mat = materialize(h);
  CHECK(mat.asymmetry < 1e-8);

  const FullSpectrum dense = dense_symmetric_eig(mat.matrix);
  double top = 0.0;
  for (double lambda : dense.eigenvalues) {
    if (std::fabs(lambda) > std::fabs(top)) top = lambda;
  }
  const EigenResult pi = top_eigenpairs(h, 1, 1e-8, 5000, 104);
  CHECK(ht::rel_err(pi.eigenvalues[0], top) < 1e-6);
}

TEST_CASE("hutchinson trace of the toy Hessian matches the diagonal sum") {
  const ModelConfig c =
      toy_config(Activation::kSigmoid, LossKind::kMse, true, false);
  const Batch b = toy_batch(c, 12, 111);
  const ParamVector p = init_params(c, 112);
  const SymmetricOperator h = hessian_operator(c, p, b);

  const Materialized mat = materialize(h);
  double exact = 0.0;
  for (std::size_t i = 0; i < mat.matrix.dim(); ++i) {
    exact += mat.matrix.at(i, i);
  }

  ProbeConfig probes;
  probes.seed = 113;
  probes.count = 1500;
  const TraceEstimate est = hutchinson_trace(h, probes);
  CHECK(std::fabs(est.mean - exact) < 3.0 * est.std_error);
}

TEST_CASE("removing norm layers changes the trace (report only)") {
  ModelConfig with = toy_config(Activation::kTanh, LossKind::kCrossEntropy,
                                true, false);
  ModelConfig without = with;
  without.norm = {false, false};
  const Batch b = toy_batch(with, 16, 121);

  ProbeConfig probes;
  probes.seed = 122;
  probes.count = 100;
  const TraceEstimate t_with =
      hutchinson_trace(hessian_operator(with, init_params(with, 123), b),
                       probes);
  const TraceEstimate t_without = hutchinson_trace(
      hessian_operator(without, init_params(without, 123), b), probes);
  MESSAGE("trace with norm: ", t_with.mean, " +- ", t_with.std_error,
          "; without: ", t_without.mean, " +- ", t_without.std_error);
  CHECK(std::isfinite(t_with.mean));
  CHECK(std::isfinite(t_without.mean));
}

TEST_CASE("batch normalization absorbs constant bias shifts") {
  ModelConfig c;
  c.input_dim = 2;
  c.output_dim = 2;
  c.hidden = {5};
  c.norm = {true};
  c.loss = LossKind::kMse;
  const Batch b = toy_batch(c, 10, 131);
  ParamVector p = init_params(c, 132);
  const double base = forward_loss(c, p, b);

  const Segment& bias = p.layout.find("layer0.bias");
  for (std::size_t i = 0; i < bias.length; ++i) {
    p.values[bias.offset + i] += 0.73;
  }
  CHECK(std::fabs(forward_loss(c, p, b) - base) <= 1e-10);
}

TEST_CASE("datasets are deterministic and well-formed") {
  const Batch a = make_dataset(DatasetKind::kTwoGaussians, 50, 0.2, 7);
  const Batch b = make_dataset(DatasetKind::kTwoGaussians, 50, 0.2, 7);
  CHECK(a.inputs == b.inputs);
  CHECK(a.targets == b.targets);
  for (int i = 0; i < a.n; ++i) {
    const double row = a.targets[2 * std::size_t(i)] +
                       a.targets[2 * std::size_t(i) + 1];
    CHECK(row == 1.0);
  }
  CHECK_THROWS_AS(make_dataset(DatasetKind::kRing, 1, 0.0, 0),
                  std::invalid_argument);
}

TEST_CASE("a noiseless linear regression is fit exactly by the true model") {
  const Batch b = make_dataset(DatasetKind::kLinearRegression, 64, 0.0, 17);
  ModelConfig c;
  c.input_dim = 3;
  c.output_dim = 1;
  c.hidden = {};
  const ParamVector truth{{1.5, -2.0, 0.5, 0.25}, make_layout(c)};
  CHECK(forward_loss(c, truth, b) == 0.0);
}

TEST_CASE("a small MLP separates the noiseless two-gaussian classes") {
  const Batch b = make_dataset(DatasetKind::kTwoGaussians, 100, 0.0, 19);
  ModelConfig c;
  c.input_dim = 2;
  c.output_dim = 2;
  c.hidden = {8};
  c.loss = LossKind::kCrossEntropy;
  double loss = 0.0;
  train_gradient_descent(c, init_params(c, 20), b, 300, 0.3, 0.9, &loss);
  CHECK(loss < 0.1);
}
