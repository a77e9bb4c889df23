#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hesskit {

/// Small row-major matrix of doubles used for tape node values.
struct TapeMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  TapeMatrix() = default;
  TapeMatrix(int r, int c) : rows(r), cols(c), data(std::size_t(r) * c, 0.0) {}

  double& at(int r, int c) { return data[std::size_t(r) * cols + c]; }
  double at(int r, int c) const { return data[std::size_t(r) * cols + c]; }
  std::size_t size() const { return data.size(); }
};

/// Expression tape with eager evaluation whose reverse pass emits ordinary
/// tape nodes, so the gradient is itself differentiable: running
/// gradients() over a node produced by a previous gradients() call yields
/// exact second derivatives. A tape instance is single-threaded; callers
/// wanting concurrency build one tape per evaluation.
class Tape {
 public:
  using NodeId = int;

  // Leaves.
  NodeId constant(TapeMatrix value);
  NodeId param(TapeMatrix value);  // differentiation target

  // Elementwise binary (same shape).
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);

  // Affine by a compile-time scalar.
  NodeId scalar_mul(NodeId a, double c);
  NodeId scalar_add(NodeId a, double c);

  // Linear algebra.
  NodeId matmul(NodeId a, NodeId b);  // (n x p) * (p x q)
  NodeId transpose(NodeId a);

  // Reductions and their adjoint broadcasts.
  NodeId sum_rows(NodeId a);                    // (n x d) -> (1 x d)
  NodeId broadcast_rows(NodeId a, int rows);    // (1 x d) -> (rows x d)
  NodeId sum_cols(NodeId a);                    // (n x d) -> (n x 1)
  NodeId broadcast_cols(NodeId a, int cols);    // (n x 1) -> (n x cols)
  NodeId sum_all(NodeId a);                     // (n x d) -> (1 x 1)
  NodeId broadcast_all(NodeId a, int rows, int cols);  // (1 x 1) -> (r x c)

  // Elementwise unary.
  NodeId tanh(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId softplus(NodeId a);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId rsqrt(NodeId a);
  NodeId reciprocal(NodeId a);

  const TapeMatrix& value(NodeId id) const { return nodes_[id].val; }
  int rows(NodeId id) const { return nodes_[id].val.rows; }
  int cols(NodeId id) const { return nodes_[id].val.cols; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse pass from a 1x1 target. Returns, per requested leaf, the id
  /// of a node holding dTarget/dLeaf (shaped like the leaf). The returned
  /// nodes are ordinary tape nodes and can be differentiated again.
  std::vector<NodeId> gradients(NodeId target, std::span<const NodeId> wrt);

  /// Replays the forward computation over the recorded node list and
  /// checks it reproduces every stored value bit for bit.
  bool reevaluation_matches() const;

 private:
  enum class Op : std::uint8_t {
    kConst, kParam, kAdd, kSub, kMul, kScalarMul, kScalarAdd,
    kMatmul, kTranspose, kSumRows, kBroadcastRows, kSumCols,
    kBroadcastCols, kSumAll, kBroadcastAll, kTanh, kSigmoid,
    kSoftplus, kExp, kLog, kRsqrt, kReciprocal,
  };

  struct Node {
    Op op;
    NodeId a = -1;
    NodeId b = -1;
    double c = 0.0;  // scalar for kScalarMul / kScalarAdd
    TapeMatrix val;
  };

  NodeId push(Node n);
  static TapeMatrix eval(const Node& n, const std::vector<Node>& nodes);
  NodeId unary(Op op, NodeId a);
  NodeId binary(Op op, NodeId a, NodeId b);

  std::vector<Node> nodes_;
};

}  // namespace hesskit
