#include "hesskit/symmetric_operator.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <unordered_set>

namespace hesskit {

void SymmetricOperator::apply(std::span<const double> v,
                              std::span<double> out) const {
  if (v.size() != dim_ || out.size() != dim_) {
    throw std::invalid_argument("SymmetricOperator::apply: dimension mismatch");
  }
  if (!apply_) {
    throw std::logic_error("SymmetricOperator::apply: empty operator");
  }
  apply_(v, out);
}

SymmetricOperator dense_operator(DenseMatrix a) {
  auto shared = std::make_shared<const DenseMatrix>(std::move(a));
  const std::size_t m = shared->dim();
  return SymmetricOperator(
      m, [shared](std::span<const double> v, std::span<double> out) {
        const std::size_t n = shared->dim();
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += shared->at(i, j) * v[j];
          out[i] = acc;
        }
      });
}

SymmetricOperator dense_operator(DenseMatrix a, BlockLayout layout) {
  if (layout.total() != a.dim()) {
    throw std::invalid_argument("dense_operator: layout does not cover dim");
  }
  SymmetricOperator base = dense_operator(std::move(a));
  const std::size_t m = base.dim();
  return SymmetricOperator(
      m,
      [base](std::span<const double> v, std::span<double> out) {
        base.apply(v, out);
      },
      std::move(layout));
}

namespace {

// x -= sum_j (u_j . x) u_j, basis order fixed.
void project_out(const std::vector<std::vector<double>>& basis,
                 std::span<double> x) {
  for (const auto& u : basis) {
    double dot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) dot += u[i] * x[i];
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= dot * u[i];
  }
}

}  // namespace

SymmetricOperator deflate(const SymmetricOperator& op,
                          const std::vector<std::vector<double>>& basis) {
  if (basis.empty()) return op;
  const std::size_t m = op.dim();
  for (const auto& u : basis) {
    if (u.size() != m) {
      throw std::invalid_argument("deflate: basis vector has wrong length");
    }
  }
  for (std::size_t i = 0; i < basis.size(); ++i) {
    for (std::size_t j = i; j < basis.size(); ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < m; ++k) dot += basis[i][k] * basis[j][k];
      const double expect = (i == j) ? 1.0 : 0.0;
      if (std::fabs(dot - expect) > 1e-6) {
        throw std::invalid_argument("deflate: basis is not orthonormal");
      }
    }
  }

  auto shared =
      std::make_shared<const std::vector<std::vector<double>>>(basis);
  return SymmetricOperator(
      m, [op, shared](std::span<const double> v, std::span<double> out) {
        std::vector<double> t(v.begin(), v.end());
        project_out(*shared, t);
        op.apply(t, out);
        project_out(*shared, out);
      });
}

SymmetricOperator restrict_to_block(const SymmetricOperator& op,
                                    const BlockLayout& layout,
                                    const std::vector<std::string>& selected) {
  if (layout.total() != op.dim()) {
    throw std::invalid_argument(
        "restrict_to_block: layout does not cover operator dim");
  }
  if (selected.empty()) {
    throw std::invalid_argument("restrict_to_block: empty selection");
  }
  std::unordered_set<std::string> want;
  for (const std::string& name : selected) {
    layout.find(name);  // throws on unknown segment
    want.insert(name);
  }

  // Selected segments in layout order, re-based consecutively.
  std::vector<Segment> parent;  // offsets into the parent space
  std::vector<Segment> sub;
  std::size_t sub_off = 0;
  for (const Segment& s : layout.segments()) {
    if (!want.count(s.name)) continue;
    parent.push_back(s);
    sub.push_back(Segment{s.name, sub_off, s.length});
    sub_off += s.length;
  }
  const std::size_t sub_dim = sub_off;
  const std::size_t full_dim = op.dim();

  auto segs = std::make_shared<const std::vector<Segment>>(std::move(parent));
  return SymmetricOperator(
      sub_dim,
      [op, segs, full_dim](std::span<const double> v, std::span<double> out) {
        std::vector<double> full(full_dim, 0.0);
        std::size_t pos = 0;
        for (const Segment& s : *segs) {
          std::copy_n(v.begin() + pos, s.length, full.begin() + s.offset);
          pos += s.length;
        }
        std::vector<double> w(full_dim);
        op.apply(full, w);
        pos = 0;
        for (const Segment& s : *segs) {
          std::copy_n(w.begin() + s.offset, s.length, out.begin() + pos);
          pos += s.length;
        }
      },
      BlockLayout(sub));
}

}  // namespace hesskit
