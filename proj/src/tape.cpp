#include "hesskit/tape.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace hesskit {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

}  // namespace

Tape::NodeId Tape::push(Node n) {
  n.val = eval(n, nodes_);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

TapeMatrix Tape::eval(const Node& n, const std::vector<Node>& nodes) {
  auto& A = n.a >= 0 ? nodes[n.a].val : n.val;
  switch (n.op) {
    case Op::kConst:
    case Op::kParam:
      return n.val;  // leaves carry their value already
    case Op::kAdd: {
      const TapeMatrix& B = nodes[n.b].val;
      TapeMatrix out(A.rows, A.cols);
      for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = A.data[i] + B.data[i];
      }
      return out;
    }
    case Op::kSub: {
      const TapeMatrix& B = nodes[n.b].val;
      TapeMatrix out(A.rows, A.cols);
      for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = A.data[i] - B.data[i];
      }
      return out;
    }
    case Op::kMul: {
      const TapeMatrix& B = nodes[n.b].val;
      TapeMatrix out(A.rows, A.cols);
      for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = A.data[i] * B.data[i];
      }
      return out;
    }
    case Op::kScalarMul: {
      TapeMatrix out(A.rows, A.cols);
      for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = A.data[i] * n.c;
      }
      return out;
    }
    case Op::kScalarAdd: {
      TapeMatrix out(A.rows, A.cols);
      for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = A.data[i] + n.c;
      }
      return out;
    }
    case Op::kMatmul: {
      const TapeMatrix& B = nodes[n.b].val;
      TapeMatrix out(A.rows, B.cols);
      for (int i = 0; i < A.rows; ++i) {
        for (int k = 0; k < A.cols; ++k) {
          const double aik = A.at(i, k);
          if (aik == 0.0) continue;
          for (int j = 0; j < B.cols; ++j) {
            out.at(i, j) += aik * B.at(k, j);
          }
        }
      }
      return out;
    }
    case Op::kTranspose: {
      TapeMatrix out(A.cols, A.rows);
      for (int i = 0; i < A.rows; ++i) {
        for (int j = 0; j < A.cols; ++j) out.at(j, i) = A.at(i, j);
      }
      return out;
    }
    case Op::kSumRows: {
      TapeMatrix out(1, A.cols);
      for (int i = 0; i < A.rows; ++i) {
        for (int j = 0; j < A.cols; ++j) out.at(0, j) += A.at(i, j);
      }
      return out;
    }
    case Op::kBroadcastRows: {
      const int r = static_cast<int>(n.c);
      TapeMatrix out(r, A.cols);
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < A.cols; ++j) out.at(i, j) = A.at(0, j);
      }
      return out;
    }
    case Op::kSumCols: {
      TapeMatrix out(A.rows, 1);
      for (int i = 0; i < A.rows; ++i) {
        double acc = 0.0;
        for (int j = 0; j < A.cols; ++j) acc += A.at(i, j);
        out.at(i, 0) = acc;
      }
      return out;
    }
    case Op::kBroadcastCols: {
      const int c = static_cast<int>(n.c);
      TapeMatrix out(A.rows, c);
      for (int i = 0; i < A.rows; ++i) {
        for (int j = 0; j < c; ++j) out.at(i, j) = A.at(i, 0);
      }
      return out;
    }
    case Op::kSumAll: {
      TapeMatrix out(1, 1);
      double acc = 0.0;
      for (double x : A.data) acc += x;
      out.at(0, 0) = acc;
      return out;
    }
    case Op::kBroadcastAll: {
      const int r = static_cast<int>(n.c);
      const int c = n.b;  // column count stashed in b for this op
      TapeMatrix out(r, c);
      const double x = A.at(0, 0);
      for (double& y : out.data) y = x;
      return out;
    }
    case Op::kTanh: {
      TapeMatrix out(A.rows, A.cols);
      for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = std::tanh(A.data[i]);
      }
      return out;
    }
    case Op::kSigmoid: {
      TapeMatrix out(A.rows, A.cols);
      for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = stable_sigmoid(A.data[i]);
      }
      return out;
    }
    case Op::kSoftplus: {
      TapeMatrix out(A.rows, A.cols);
      for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = stable_softplus(A.data[i]);
      }
      return out;
    }
    case Op::kExp: {
      TapeMatrix out(A.rows, A.cols);
      for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = std::exp(A.data[i]);
      }
      return out;
    }
    case Op::kLog: {
      TapeMatrix out(A.rows, A.cols);
      for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = std::log(A.data[i]);
      }
      return out;
    }
    case Op::kRsqrt: {
      TapeMatrix out(A.rows, A.cols);
      for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = 1.0 / std::sqrt(A.data[i]);
      }
      return out;
    }
    case Op::kReciprocal: {
      TapeMatrix out(A.rows, A.cols);
      for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = 1.0 / A.data[i];
      }
      return out;
    }
  }
  throw std::logic_error("Tape: unknown op");
}

Tape::NodeId Tape::constant(TapeMatrix value) {
  Node n;
  n.op = Op::kConst;
  n.val = std::move(value);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

Tape::NodeId Tape::param(TapeMatrix value) {
  Node n;
  n.op = Op::kParam;
  n.val = std::move(value);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

Tape::NodeId Tape::binary(Op op, NodeId a, NodeId b) {
  const TapeMatrix& A = nodes_[a].val;
  const TapeMatrix& B = nodes_[b].val;
  if (op == Op::kMatmul) {
    if (A.cols != B.rows) {
      throw std::invalid_argument("Tape::matmul: inner dimensions differ");
    }
  } else if (A.rows != B.rows || A.cols != B.cols) {
    throw std::invalid_argument("Tape: elementwise shapes differ");
  }
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  return push(std::move(n));
}

Tape::NodeId Tape::unary(Op op, NodeId a) {
  Node n;
  n.op = op;
  n.a = a;
  return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) { return binary(Op::kAdd, a, b); }
Tape::NodeId Tape::sub(NodeId a, NodeId b) { return binary(Op::kSub, a, b); }
Tape::NodeId Tape::mul(NodeId a, NodeId b) { return binary(Op::kMul, a, b); }

Tape::NodeId Tape::scalar_mul(NodeId a, double c) {
  Node n;
  n.op = Op::kScalarMul;
  n.a = a;
  n.c = c;
  return push(std::move(n));
}

Tape::NodeId Tape::scalar_add(NodeId a, double c) {
  Node n;
  n.op = Op::kScalarAdd;
  n.a = a;
  n.c = c;
  return push(std::move(n));
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  return binary(Op::kMatmul, a, b);
}

Tape::NodeId Tape::transpose(NodeId a) { return unary(Op::kTranspose, a); }
Tape::NodeId Tape::sum_rows(NodeId a) { return unary(Op::kSumRows, a); }

Tape::NodeId Tape::broadcast_rows(NodeId a, int r) {
  if (nodes_[a].val.rows != 1) {
    throw std::invalid_argument("Tape::broadcast_rows: input must be 1 x d");
  }
  Node n;
  n.op = Op::kBroadcastRows;
  n.a = a;
  n.c = r;
  return push(std::move(n));
}

Tape::NodeId Tape::sum_cols(NodeId a) { return unary(Op::kSumCols, a); }

Tape::NodeId Tape::broadcast_cols(NodeId a, int c) {
  if (nodes_[a].val.cols != 1) {
    throw std::invalid_argument("Tape::broadcast_cols: input must be n x 1");
  }
  Node n;
  n.op = Op::kBroadcastCols;
  n.a = a;
  n.c = c;
  return push(std::move(n));
}

Tape::NodeId Tape::sum_all(NodeId a) { return unary(Op::kSumAll, a); }

Tape::NodeId Tape::broadcast_all(NodeId a, int rows, int cols) {
  if (nodes_[a].val.rows != 1 || nodes_[a].val.cols != 1) {
    throw std::invalid_argument("Tape::broadcast_all: input must be 1 x 1");
  }
  Node n;
  n.op = Op::kBroadcastAll;
  n.a = a;
  n.c = rows;
  n.b = cols;  // reuses the b slot; kBroadcastAll has a single input
  return push(std::move(n));
}

Tape::NodeId Tape::tanh(NodeId a) { return unary(Op::kTanh, a); }
Tape::NodeId Tape::sigmoid(NodeId a) { return unary(Op::kSigmoid, a); }
Tape::NodeId Tape::softplus(NodeId a) { return unary(Op::kSoftplus, a); }
Tape::NodeId Tape::exp(NodeId a) { return unary(Op::kExp, a); }
Tape::NodeId Tape::log(NodeId a) { return unary(Op::kLog, a); }
Tape::NodeId Tape::rsqrt(NodeId a) { return unary(Op::kRsqrt, a); }
Tape::NodeId Tape::reciprocal(NodeId a) { return unary(Op::kReciprocal, a); }

std::vector<Tape::NodeId> Tape::gradients(NodeId target,
                                          std::span<const NodeId> wrt) {
  if (nodes_[target].val.rows != 1 || nodes_[target].val.cols != 1) {
    throw std::invalid_argument("Tape::gradients: target must be scalar");
  }
  for (NodeId leaf : wrt) {
    if (nodes_[leaf].op != Op::kParam) {
      throw std::invalid_argument("Tape::gradients: wrt nodes must be params");
    }
  }

  const int n = target + 1;

  // needs[i]: node i depends on some requested leaf.
  std::vector<char> needs(n, 0);
  for (NodeId leaf : wrt) {
    if (leaf < n) needs[leaf] = 1;
  }
  for (int i = 0; i < n; ++i) {
    const Node& nd = nodes_[i];
    if (nd.op == Op::kConst || nd.op == Op::kParam) continue;
    bool dep = nd.a >= 0 && needs[nd.a];
    if (nd.op != Op::kBroadcastAll) {
      dep = dep || (nd.b >= 0 && needs[nd.b]);
    }
    needs[i] = dep ? 1 : 0;
  }

  // reach[i]: the target depends on node i.
  std::vector<char> reach(n, 0);
  reach[target] = 1;
  for (int i = target; i >= 0; --i) {
    if (!reach[i]) continue;
    const Node& nd = nodes_[i];
    if (nd.a >= 0) reach[nd.a] = 1;
    if (nd.b >= 0 && nd.op != Op::kBroadcastAll) reach[nd.b] = 1;
  }

  std::vector<NodeId> adj(n, -1);
  {
    TapeMatrix one(1, 1);
    one.at(0, 0) = 1.0;
    adj[target] = constant(std::move(one));
  }

  auto accumulate = [&](NodeId node, NodeId contrib) {
    if (node >= n || !needs[node]) return;
    adj[node] = adj[node] < 0 ? contrib : add(adj[node], contrib);
  };

  struct NodeRef {
    Op op;
    NodeId a, b;
    double c;
  };
  for (int i = target; i >= 0; --i) {
    if (!reach[i] || !needs[i] || adj[i] < 0) continue;
    // Copy the descriptor: pushing adjoint nodes may reallocate nodes_.
    const NodeRef nd{nodes_[i].op, nodes_[i].a, nodes_[i].b, nodes_[i].c};
    const NodeId g = adj[i];
    switch (nd.op) {
      case Op::kConst:
      case Op::kParam:
        break;
      case Op::kAdd:
        accumulate(nd.a, g);
        accumulate(nd.b, g);
        break;
      case Op::kSub:
        accumulate(nd.a, g);
        accumulate(nd.b, scalar_mul(g, -1.0));
        break;
      case Op::kMul:
        accumulate(nd.a, mul(g, nd.b));
        accumulate(nd.b, mul(g, nd.a));
        break;
      case Op::kScalarMul:
        accumulate(nd.a, scalar_mul(g, nd.c));
        break;
      case Op::kScalarAdd:
        accumulate(nd.a, g);
        break;
      case Op::kMatmul:
        accumulate(nd.a, matmul(g, transpose(nd.b)));
        accumulate(nd.b, matmul(transpose(nd.a), g));
        break;
      case Op::kTranspose:
        accumulate(nd.a, transpose(g));
        break;
      case Op::kSumRows:
        accumulate(nd.a, broadcast_rows(g, nodes_[nd.a].val.rows));
        break;
      case Op::kBroadcastRows:
        accumulate(nd.a, sum_rows(g));
        break;
      case Op::kSumCols:
        accumulate(nd.a, broadcast_cols(g, nodes_[nd.a].val.cols));
        break;
      case Op::kBroadcastCols:
        accumulate(nd.a, sum_cols(g));
        break;
      case Op::kSumAll:
        accumulate(nd.a, broadcast_all(g, nodes_[nd.a].val.rows,
                                       nodes_[nd.a].val.cols));
        break;
      case Op::kBroadcastAll:
        accumulate(nd.a, sum_all(g));
        break;
      case Op::kTanh: {
        // d tanh = 1 - y^2, expressed through the already-computed y.
        const NodeId y = i;
        accumulate(nd.a, sub(g, mul(g, mul(y, y))));
        break;
      }
      case Op::kSigmoid: {
        const NodeId y = i;
        const NodeId gy = mul(g, y);
        accumulate(nd.a, sub(gy, mul(gy, y)));
        break;
      }
      case Op::kSoftplus:
        accumulate(nd.a, mul(g, sigmoid(nd.a)));
        break;
      case Op::kExp:
        accumulate(nd.a, mul(g, i));
        break;
      case Op::kLog:
        accumulate(nd.a, mul(g, reciprocal(nd.a)));
        break;
      case Op::kRsqrt: {
        // d x^(-1/2) = -1/2 x^(-3/2) = -1/2 y^3
        const NodeId y = i;
        accumulate(nd.a, scalar_mul(mul(g, mul(y, mul(y, y))), -0.5));
        break;
      }
      case Op::kReciprocal: {
        const NodeId y = i;
        accumulate(nd.a, scalar_mul(mul(g, mul(y, y)), -1.0));
        break;
      }
    }
  }

  std::vector<NodeId> out;
  out.reserve(wrt.size());
  for (NodeId leaf : wrt) {
    if (leaf < n && adj[leaf] >= 0) {
      out.push_back(adj[leaf]);
    } else {
      out.push_back(constant(
          TapeMatrix(nodes_[leaf].val.rows, nodes_[leaf].val.cols)));
    }
  }
  return out;
}

bool Tape::reevaluation_matches() const {
  for (const Node& nd : nodes_) {
    if (nd.op == Op::kConst || nd.op == Op::kParam) continue;
    const TapeMatrix redo = eval(nd, nodes_);
    if (redo.rows != nd.val.rows || redo.cols != nd.val.cols) return false;
    if (std::memcmp(redo.data.data(), nd.val.data.data(),
                    redo.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace hesskit
