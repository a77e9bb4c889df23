#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hesskit/block_layout.hpp"
#include "hesskit/symmetric_operator.hpp"

namespace hesskit {

enum class Activation { kTanh, kSigmoid, kSoftplus };
enum class LossKind { kMse, kCrossEntropy };

/// A small fully-connected network: input -> hidden layers -> linear
/// output -> loss. Hidden layers optionally apply a training-mode batch
/// normalization (batch statistics, learnable scale/shift) to the
/// pre-activation, and optionally add an identity skip from the layer
/// input (widths must match). Activations are smooth on purpose: every
/// estimator downstream assumes a well-defined Hessian. An empty hidden
/// list degenerates to a pure linear model.
struct ModelConfig {
  int input_dim = 0;
  int output_dim = 0;
  std::vector<int> hidden;
  Activation activation = Activation::kTanh;
  std::vector<bool> residual;  // per hidden layer; empty = all off
  std::vector<bool> norm;      // per hidden layer; empty = all off
  LossKind loss = LossKind::kMse;
};

/// Flattened parameters theta plus the layout naming each layer segment.
/// Flattening order: layers in order, weight matrix row-major (row =
/// input index), then bias, then norm scale, then norm shift.
struct ParamVector {
  std::vector<double> values;
  BlockLayout layout;
};

struct Batch {
  int n = 0;
  int input_dim = 0;
  int output_dim = 0;
  std::vector<double> inputs;   // row-major n x input_dim
  std::vector<double> targets;  // row-major n x output_dim
};

void validate_config(const ModelConfig& config);
std::size_t param_count(const ModelConfig& config);
BlockLayout make_layout(const ModelConfig& config);

/// Weights uniform in (-s, s) with s = sqrt(6 / (fan_in + fan_out));
/// biases 0, norm scales 1, norm shifts 0. Deterministic per seed.
ParamVector init_params(const ModelConfig& config, std::uint64_t seed);

/// Mean loss over the batch. Batch-normalization layers always use the
/// batch statistics (training mode, eps 1e-5).
double forward_loss(const ModelConfig& config, const ParamVector& params,
                    const Batch& batch);

/// Exact reverse-mode gradient of forward_loss w.r.t. theta.
ParamVector gradient(const ModelConfig& config, const ParamVector& params,
                     const Batch& batch);

/// Exact Hessian-vector product: the gradient is built on the tape, the
/// scalar g^T v is formed, and a second reverse pass differentiates it.
/// No finite differences anywhere.
ParamVector hvp(const ModelConfig& config, const ParamVector& params,
                const Batch& batch, const ParamVector& v);

/// Wraps hvp as a SymmetricOperator of dimension m with the parameter
/// layout attached (so restrict_to_block can select layer segments).
/// Each apply builds a fresh tape, so the operator is reentrant.
SymmetricOperator hessian_operator(const ModelConfig& config,
                                   const ParamVector& params,
                                   const Batch& batch);

enum class DatasetKind { kTwoGaussians, kRing, kLinearRegression };

/// Deterministic synthetic datasets. two_gaussians and ring are 2-class
/// problems in the plane with one-hot targets (input_dim 2, output_dim 2);
/// linear_regression draws x in (-1,1)^3 and sets y = x.W* + b* + noise
/// for the fixed coefficients W* = (1.5, -2.0, 0.5), b* = 0.25.
Batch make_dataset(DatasetKind kind, int n, double noise, std::uint64_t seed);

/// Plain full-batch gradient descent with momentum. Returns the updated
/// parameters; loss_out (optional) receives the final loss.
ParamVector train_gradient_descent(const ModelConfig& config,
                                   ParamVector params, const Batch& batch,
                                   int steps, double learning_rate,
                                   double momentum = 0.9,
                                   double* loss_out = nullptr);

}  // namespace hesskit
