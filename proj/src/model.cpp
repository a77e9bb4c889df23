#include "hesskit/model.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "hesskit/rng.hpp"
#include "hesskit/tape.hpp"

namespace hesskit {

namespace {

constexpr double kBnEps = 1e-5;

struct LayerShape {
  int fan_in = 0;
  int fan_out = 0;
  bool norm = false;
  bool residual = false;
};

std::vector<LayerShape> layer_shapes(const ModelConfig& c) {
  std::vector<LayerShape> shapes;
  int in = c.input_dim;
  for (std::size_t i = 0; i < c.hidden.size(); ++i) {
    LayerShape s;
    s.fan_in = in;
    s.fan_out = c.hidden[i];
    s.norm = i < c.norm.size() && c.norm[i];
    s.residual = i < c.residual.size() && c.residual[i];
    shapes.push_back(s);
    in = s.fan_out;
  }
  shapes.push_back(LayerShape{in, c.output_dim, false, false});  // output
  return shapes;
}

bool flag_at(const std::vector<bool>& flags, std::size_t i) {
  return i < flags.size() && flags[i];
}

}  // namespace

void validate_config(const ModelConfig& c) {
  if (c.input_dim < 1 || c.output_dim < 1) {
    throw std::invalid_argument("ModelConfig: dims must be positive");
  }
  for (int h : c.hidden) {
    if (h < 1) throw std::invalid_argument("ModelConfig: hidden width < 1");
  }
  if (!c.residual.empty() && c.residual.size() != c.hidden.size()) {
    throw std::invalid_argument(
        "ModelConfig: residual flags must match hidden layer count");
  }
  if (!c.norm.empty() && c.norm.size() != c.hidden.size()) {
    throw std::invalid_argument(
        "ModelConfig: norm flags must match hidden layer count");
  }
  int in = c.input_dim;
  for (std::size_t i = 0; i < c.hidden.size(); ++i) {
    if (flag_at(c.residual, i) && in != c.hidden[i]) {
      throw std::invalid_argument(
          "ModelConfig: residual at layer " + std::to_string(i) +
          " needs equal in/out width (" + std::to_string(in) + " vs " +
          std::to_string(c.hidden[i]) + ")");
    }
    in = c.hidden[i];
  }
}

BlockLayout make_layout(const ModelConfig& c) {
  validate_config(c);
  const auto shapes = layer_shapes(c);
  std::vector<Segment> segs;
  std::size_t off = 0;
  auto push = [&](std::string name, std::size_t len) {
    segs.push_back(Segment{std::move(name), off, len});
    off += len;
  };
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const bool output = i + 1 == shapes.size();
    const std::string base =
        output ? "output" : "layer" + std::to_string(i);
    const LayerShape& s = shapes[i];
    push(base + ".weight", std::size_t(s.fan_in) * s.fan_out);
    push(base + ".bias", s.fan_out);
    if (s.norm) {
      push(base + ".norm_scale", s.fan_out);
      push(base + ".norm_shift", s.fan_out);
    }
  }
  return BlockLayout(std::move(segs));
}

std::size_t param_count(const ModelConfig& c) { return make_layout(c).total(); }

ParamVector init_params(const ModelConfig& c, std::uint64_t seed) {
  BlockLayout layout = make_layout(c);
  std::vector<double> values(layout.total(), 0.0);
  RngStream stream(seed, 0);
  const auto shapes = layer_shapes(c);
  std::size_t pos = 0;
  for (const LayerShape& s : shapes) {
    const double scale = std::sqrt(6.0 / double(s.fan_in + s.fan_out));
    for (int k = 0; k < s.fan_in * s.fan_out; ++k) {
      values[pos++] = scale * (2.0 * stream.next_uniform() - 1.0);
    }
    pos += s.fan_out;  // bias stays 0
    if (s.norm) {
      for (int k = 0; k < s.fan_out; ++k) values[pos + k] = 1.0;  // scale
      pos += 2 * std::size_t(s.fan_out);  // shift stays 0
    }
  }
  return ParamVector{std::move(values), std::move(layout)};
}

namespace {

struct BuiltTape {
  Tape tape;
  Tape::NodeId loss = -1;
  std::vector<Tape::NodeId> leaves;  // flattening order
};

void validate_batch(const ModelConfig& c, const Batch& b) {
  if (b.n < 1) throw std::invalid_argument("Batch: n must be >= 1");
  if (b.input_dim != c.input_dim || b.output_dim != c.output_dim) {
    throw std::invalid_argument("Batch: dims do not match the model config");
  }
  if (b.inputs.size() != std::size_t(b.n) * b.input_dim ||
      b.targets.size() != std::size_t(b.n) * b.output_dim) {
    throw std::invalid_argument("Batch: row counts inconsistent with n");
  }
  if (c.loss == LossKind::kCrossEntropy) {
    for (int i = 0; i < b.n; ++i) {
      double s = 0.0;
      for (int j = 0; j < b.output_dim; ++j) {
        s += b.targets[std::size_t(i) * b.output_dim + j];
      }
      if (std::fabs(s - 1.0) > 1e-8) {
        throw std::invalid_argument(
            "Batch: cross-entropy targets must sum to 1 per row");
      }
    }
  }
}

/// theta is unflattened into one param leaf per layout segment; the
/// forward pass and loss are laid down on the tape.
BuiltTape build_loss_tape(const ModelConfig& c, std::span<const double> theta,
                          const Batch& batch) {
  const auto shapes = layer_shapes(c);
  BuiltTape built;
  Tape& tape = built.tape;
  const int n = batch.n;

  TapeMatrix x_in(n, c.input_dim);
  x_in.data = batch.inputs;
  Tape::NodeId x = tape.constant(std::move(x_in));

  std::size_t pos = 0;
  auto take_leaf = [&](int r, int cdim) {
    TapeMatrix m(r, cdim);
    std::copy_n(theta.begin() + pos, m.size(), m.data.begin());
    pos += m.size();
    const Tape::NodeId id = tape.param(std::move(m));
    built.leaves.push_back(id);
    return id;
  };

  Tape::NodeId h = x;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const LayerShape& s = shapes[i];
    const bool output = i + 1 == shapes.size();
    const Tape::NodeId w = take_leaf(s.fan_in, s.fan_out);
    const Tape::NodeId b = take_leaf(1, s.fan_out);

    Tape::NodeId z =
        tape.add(tape.matmul(h, w), tape.broadcast_rows(b, n));
    if (!output && s.norm) {
      const Tape::NodeId gamma = take_leaf(1, s.fan_out);
      const Tape::NodeId beta = take_leaf(1, s.fan_out);
      const double inv_n = 1.0 / double(n);
      const Tape::NodeId mu = tape.scalar_mul(tape.sum_rows(z), inv_n);
      const Tape::NodeId centered =
          tape.sub(z, tape.broadcast_rows(mu, n));
      const Tape::NodeId var = tape.scalar_mul(
          tape.sum_rows(tape.mul(centered, centered)), inv_n);
      const Tape::NodeId inv_std =
          tape.rsqrt(tape.scalar_add(var, kBnEps));
      const Tape::NodeId xhat =
          tape.mul(centered, tape.broadcast_rows(inv_std, n));
      z = tape.add(tape.mul(xhat, tape.broadcast_rows(gamma, n)),
                   tape.broadcast_rows(beta, n));
    }
    if (!output && s.residual) {
      z = tape.add(z, h);
    }
    if (output) {
      h = z;
    } else {
      switch (c.activation) {
        case Activation::kTanh: h = tape.tanh(z); break;
        case Activation::kSigmoid: h = tape.sigmoid(z); break;
        case Activation::kSoftplus: h = tape.softplus(z); break;
      }
    }
  }

  TapeMatrix y_in(n, c.output_dim);
  y_in.data = batch.targets;
  const Tape::NodeId y = tape.constant(std::move(y_in));
  const double inv_n = 1.0 / double(n);

  if (c.loss == LossKind::kMse) {
    const Tape::NodeId d = tape.sub(h, y);
    built.loss = tape.scalar_mul(tape.sum_all(tape.mul(d, d)), inv_n);
  } else {
    // Row max as a detached constant: log-sum-exp is invariant to the
    // shift, so gradients stay exact while the exp cannot overflow.
    const TapeMatrix& logits = tape.value(h);
    TapeMatrix mx(n, 1);
    for (int i = 0; i < n; ++i) {
      double m = logits.at(i, 0);
      for (int j = 1; j < c.output_dim; ++j) {
        m = std::max(m, logits.at(i, j));
      }
      mx.at(i, 0) = m;
    }
    const Tape::NodeId zmax = tape.constant(std::move(mx));
    const Tape::NodeId shifted =
        tape.sub(h, tape.broadcast_cols(zmax, c.output_dim));
    const Tape::NodeId lse =
        tape.add(tape.log(tape.sum_cols(tape.exp(shifted))), zmax);
    const Tape::NodeId picked = tape.sum_cols(tape.mul(y, h));
    built.loss =
        tape.scalar_mul(tape.sum_all(tape.sub(lse, picked)), inv_n);
  }
  return built;
}

void check_params(const ModelConfig& c, const ParamVector& params) {
  if (params.values.size() != param_count(c)) {
    throw std::invalid_argument("ParamVector: wrong length for this config");
  }
}

std::vector<double> flatten_leaf_values(const Tape& tape,
                                        std::span<const Tape::NodeId> ids,
                                        std::size_t total) {
  std::vector<double> out;
  out.reserve(total);
  for (Tape::NodeId id : ids) {
    const TapeMatrix& m = tape.value(id);
    out.insert(out.end(), m.data.begin(), m.data.end());
  }
  return out;
}

std::vector<double> hvp_raw(const ModelConfig& c,
                            std::span<const double> theta, const Batch& batch,
                            std::span<const double> v) {
  BuiltTape built = build_loss_tape(c, theta, batch);
  Tape& tape = built.tape;
  const std::vector<Tape::NodeId> grads =
      tape.gradients(built.loss, built.leaves);

  // s = g . v with v entering as constants, leaf by leaf.
  Tape::NodeId s = -1;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    TapeMatrix chunk(tape.rows(grads[i]), tape.cols(grads[i]));
    std::copy_n(v.begin() + pos, chunk.size(), chunk.data.begin());
    pos += chunk.size();
    const Tape::NodeId term =
        tape.sum_all(tape.mul(grads[i], tape.constant(std::move(chunk))));
    s = s < 0 ? term : tape.add(s, term);
  }

  const std::vector<Tape::NodeId> hv = tape.gradients(s, built.leaves);
  return flatten_leaf_values(tape, hv, theta.size());
}

}  // namespace

double forward_loss(const ModelConfig& c, const ParamVector& params,
                    const Batch& batch) {
  validate_config(c);
  check_params(c, params);
  validate_batch(c, batch);
  BuiltTape built = build_loss_tape(c, params.values, batch);
  return built.tape.value(built.loss).at(0, 0);
}

ParamVector gradient(const ModelConfig& c, const ParamVector& params,
                     const Batch& batch) {
  validate_config(c);
  check_params(c, params);
  validate_batch(c, batch);
  BuiltTape built = build_loss_tape(c, params.values, batch);
  const std::vector<Tape::NodeId> grads =
      built.tape.gradients(built.loss, built.leaves);
  return ParamVector{
      flatten_leaf_values(built.tape, grads, params.values.size()),
      params.layout};
}

ParamVector hvp(const ModelConfig& c, const ParamVector& params,
                const Batch& batch, const ParamVector& v) {
  validate_config(c);
  check_params(c, params);
  validate_batch(c, batch);
  if (!(v.layout == params.layout)) {
    throw std::invalid_argument("hvp: v layout does not match params layout");
  }
  return ParamVector{hvp_raw(c, params.values, batch, v.values),
                     params.layout};
}

SymmetricOperator hessian_operator(const ModelConfig& c,
                                   const ParamVector& params,
                                   const Batch& batch) {
  validate_config(c);
  check_params(c, params);
  validate_batch(c, batch);
  auto config = std::make_shared<const ModelConfig>(c);
  auto theta = std::make_shared<const std::vector<double>>(params.values);
  auto data = std::make_shared<const Batch>(batch);
  const std::size_t m = params.values.size();
  return SymmetricOperator(
      m,
      [config, theta, data](std::span<const double> v,
                            std::span<double> out) {
        const std::vector<double> hv = hvp_raw(*config, *theta, *data, v);
        std::copy(hv.begin(), hv.end(), out.begin());
      },
      params.layout);
}

Batch make_dataset(DatasetKind kind, int n, double noise,
                   std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("make_dataset: n must be >= 2");
  RngStream stream(seed, 0);
  Batch b;
  b.n = n;
  switch (kind) {
    case DatasetKind::kTwoGaussians: {
      b.input_dim = 2;
      b.output_dim = 2;
      b.inputs.resize(std::size_t(n) * 2);
      b.targets.assign(std::size_t(n) * 2, 0.0);
      const double centers[2][2] = {{-1.5, -1.5}, {1.5, 1.5}};
      for (int i = 0; i < n; ++i) {
        const int cls = i % 2;
        b.inputs[2 * std::size_t(i)] =
            centers[cls][0] + noise * stream.next_gaussian();
        b.inputs[2 * std::size_t(i) + 1] =
            centers[cls][1] + noise * stream.next_gaussian();
        b.targets[2 * std::size_t(i) + cls] = 1.0;
      }
      break;
    }
    case DatasetKind::kRing: {
      b.input_dim = 2;
      b.output_dim = 2;
      b.inputs.resize(std::size_t(n) * 2);
      b.targets.assign(std::size_t(n) * 2, 0.0);
      for (int i = 0; i < n; ++i) {
        const int cls = i % 2;
        const double base_r = cls == 0 ? 0.7 : 1.8;
        const double angle =
            2.0 * 3.14159265358979323846 * stream.next_uniform();
        const double r = base_r + noise * stream.next_gaussian();
        b.inputs[2 * std::size_t(i)] = r * std::cos(angle);
        b.inputs[2 * std::size_t(i) + 1] = r * std::sin(angle);
        b.targets[2 * std::size_t(i) + cls] = 1.0;
      }
      break;
    }
    case DatasetKind::kLinearRegression: {
      b.input_dim = 3;
      b.output_dim = 1;
      b.inputs.resize(std::size_t(n) * 3);
      b.targets.resize(n);
      const double w_true[3] = {1.5, -2.0, 0.5};
      const double b_true = 0.25;
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = 0; k < 3; ++k) {
          const double x = 2.0 * stream.next_uniform() - 1.0;
          b.inputs[3 * std::size_t(i) + k] = x;
          acc += x * w_true[k];
        }
        b.targets[i] = acc + b_true + noise * stream.next_gaussian();
      }
      break;
    }
    default:
      throw std::invalid_argument("make_dataset: unknown kind");
  }
  return b;
}

ParamVector train_gradient_descent(const ModelConfig& c, ParamVector params,
                                   const Batch& batch, int steps,
                                   double learning_rate, double momentum,
                                   double* loss_out) {
  std::vector<double> velocity(params.values.size(), 0.0);
  for (int step = 0; step < steps; ++step) {
    const ParamVector g = gradient(c, params, batch);
    for (std::size_t i = 0; i < params.values.size(); ++i) {
      velocity[i] = momentum * velocity[i] - learning_rate * g.values[i];
      params.values[i] += velocity[i];
    }
  }
  if (loss_out != nullptr) *loss_out = forward_loss(c, params, batch);
  return params;
}

}  // namespace hesskit
