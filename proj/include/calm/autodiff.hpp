// Copyright 2026 CALM Authors
// Licensed under the Apache License, Version 2.0
//
// Small reverse-mode tape over Eigen matrices. A Graph owns the nodes of one
// forward pass; ops append nodes, backward() walks the tape in reverse
// creation order. All values are float64.

#ifndef CALM_AUTODIFF_HPP
#define CALM_AUTODIFF_HPP

#include <cmath>
#include <deque>
#include <functional>
#include <vector>

#include "calm/common.hpp"

namespace calm::ad {

struct Node {
  Matrix value;
  Matrix grad;
  std::function<void()> back;  // empty for leaves and constants
  bool requires_grad = false;
  std::size_t index = 0;
};

class Graph;

class Var {
 public:
  Var() = default;
  Var(Graph* g, Node* n) : graph_(g), node_(n) {}

  const Matrix& value() const { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad() { return node_->grad; }
  Node* node() const { return node_; }
  Graph* graph() const { return graph_; }
  bool valid() const { return node_ != nullptr; }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }

 private:
  Graph* graph_ = nullptr;
  Node* node_ = nullptr;
};

class Graph {
 public:
  // Constant: no gradient tracked.
  Var constant(Matrix v) { return emplace(std::move(v), false); }

  // Leaf with gradient accumulation (parameters, or inputs under test).
  Var leaf(Matrix v) { return emplace(std::move(v), true); }

  Var emplace(Matrix v, bool requires_grad) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.value = std::move(v);
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.requires_grad = requires_grad;
    n.index = nodes_.size() - 1;
    return Var(this, &n);
  }

  // Seeds d(root)/d(root) = 1 and propagates to every leaf reachable from it.
  void backward(Var root) {
    CALM_CHECK(root.rows() == 1 && root.cols() == 1,
               "backward: root must be scalar");
    root.mutable_grad()(0, 0) += 1.0;
    for (std::size_t i = root.node()->index + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.requires_grad && n.back) n.back();
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::deque<Node> nodes_;  // deque: node addresses stay stable
};

namespace detail {
inline Var unary(Var a, Matrix value, std::function<void(Node*, Node*)> back) {
  Graph* g = a.graph();
  Var out = g->emplace(std::move(value), a.node()->requires_grad);
  Node* an = a.node();
  Node* on = out.node();
  out.node()->back = [an, on, back = std::move(back)]() {
    if (an->requires_grad) back(an, on);
  };
  return out;
}

inline Var binary(Var a, Var b, Matrix value,
                  std::function<void(Node*, Node*, Node*)> back) {
  Graph* g = a.graph();
  bool req = a.node()->requires_grad || b.node()->requires_grad;
  Var out = g->emplace(std::move(value), req);
  Node* an = a.node();
  Node* bn = b.node();
  Node* on = out.node();
  out.node()->back = [an, bn, on, back = std::move(back)]() {
    back(an, bn, on);
  };
  return out;
}
}  // namespace detail

inline Var add(Var a, Var b) {
  CALM_CHECK(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  return detail::binary(a, b, a.value() + b.value(), [](Node* a, Node* b, Node* o) {
    if (a->requires_grad) a->grad += o->grad;
    if (b->requires_grad) b->grad += o->grad;
  });
}

inline Var sub(Var a, Var b) {
  CALM_CHECK(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  return detail::binary(a, b, a.value() - b.value(), [](Node* a, Node* b, Node* o) {
    if (a->requires_grad) a->grad += o->grad;
    if (b->requires_grad) b->grad -= o->grad;
  });
}

inline Var scale(Var a, double s) {
  return detail::unary(a, a.value() * s, [s](Node* a, Node* o) { a->grad += o->grad * s; });
}

inline Var add_const(Var a, double c) {
  return detail::unary(a, a.value().array() + c, [](Node* a, Node* o) { a->grad += o->grad; });
}

inline Var cmul(Var a, Var b) {
  CALM_CHECK(a.rows() == b.rows() && a.cols() == b.cols(), "cmul: shape mismatch");
  return detail::binary(a, b, (a.value().array() * b.value().array()).matrix(),
                        [](Node* a, Node* b, Node* o) {
    if (a->requires_grad) a->grad.array() += o->grad.array() * b->value.array();
    if (b->requires_grad) b->grad.array() += o->grad.array() * a->value.array();
  });
}

inline Var matmul(Var a, Var b) {
  CALM_CHECK(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  return detail::binary(a, b, a.value() * b.value(), [](Node* a, Node* b, Node* o) {
    if (a->requires_grad) a->grad += o->grad * b->value.transpose();
    if (b->requires_grad) b->grad += a->value.transpose() * o->grad;
  });
}

inline Var transpose(Var a) {
  return detail::unary(a, a.value().transpose(),
                       [](Node* a, Node* o) { a->grad += o->grad.transpose(); });
}

inline Var tanh_(Var a) {
  return detail::unary(a, a.value().array().tanh(), [](Node* a, Node* o) {
    a->grad.array() += o->grad.array() * (1.0 - o->value.array().square());
  });
}

inline Var sigmoid_(Var a) {
  Matrix v = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return detail::unary(a, std::move(v), [](Node* a, Node* o) {
    a->grad.array() += o->grad.array() * o->value.array() * (1.0 - o->value.array());
  });
}

// Broadcast a 1xC row vector over every row.
inline Var add_row(Var a, Var row) {
  CALM_CHECK(row.rows() == 1 && row.cols() == a.cols(), "add_row: shape mismatch");
  Matrix v = a.value();
  v.rowwise() += row.value().row(0);
  return detail::binary(a, row, std::move(v), [](Node* a, Node* r, Node* o) {
    if (a->requires_grad) a->grad += o->grad;
    if (r->requires_grad) r->grad.row(0) += o->grad.colwise().sum();
  });
}

inline Var mul_row(Var a, Var row) {
  CALM_CHECK(row.rows() == 1 && row.cols() == a.cols(), "mul_row: shape mismatch");
  Matrix v = a.value().array().rowwise() * row.value().row(0).array();
  return detail::binary(a, row, std::move(v), [](Node* a, Node* r, Node* o) {
    if (a->requires_grad)
      a->grad.array() += o->grad.array().rowwise() * r->value.row(0).array();
    if (r->requires_grad)
      r->grad.row(0).array() += (o->grad.array() * a->value.array()).colwise().sum();
  });
}

inline Var concat_cols(Var a, Var b) {
  CALM_CHECK(a.rows() == b.rows(), "concat_cols: row mismatch");
  Matrix v(a.rows(), a.cols() + b.cols());
  v << a.value(), b.value();
  Eigen::Index ac = a.cols();
  return detail::binary(a, b, std::move(v), [ac](Node* a, Node* b, Node* o) {
    if (a->requires_grad) a->grad += o->grad.leftCols(ac);
    if (b->requires_grad) b->grad += o->grad.rightCols(o->grad.cols() - ac);
  });
}

inline Var cols(Var a, Eigen::Index start, Eigen::Index n) {
  CALM_CHECK(start >= 0 && start + n <= a.cols(), "cols: block out of range");
  return detail::unary(a, a.value().middleCols(start, n),
                       [start, n](Node* a, Node* o) {
    a->grad.middleCols(start, n) += o->grad;
  });
}

inline Var gather_rows(Var a, std::vector<int> idx) {
  Matrix v(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    CALM_CHECK(idx[i] >= 0 && idx[i] < a.rows(), "gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(i)) = a.value().row(idx[i]);
  }
  return detail::unary(a, std::move(v), [idx = std::move(idx)](Node* a, Node* o) {
    for (std::size_t i = 0; i < idx.size(); ++i)
      a->grad.row(idx[i]) += o->grad.row(static_cast<Eigen::Index>(i));
  });
}

inline Var mean_rows(Var a) {
  Matrix v = a.value().colwise().mean();
  return detail::unary(a, std::move(v), [](Node* a, Node* o) {
    double inv = 1.0 / static_cast<double>(a->value.rows());
    a->grad.rowwise() += (o->grad.row(0) * inv).eval();
  });
}

inline Var sum_all(Var a) {
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return detail::unary(a, std::move(v), [](Node* a, Node* o) {
    a->grad.array() += o->grad(0, 0);
  });
}

// Numerically stable per-row softmax.
inline Var row_softmax(Var a) {
  Matrix v = a.value();
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    Eigen::RowVectorXd e = (v.row(r).array() - v.row(r).maxCoeff()).exp();
    v.row(r) = e / e.sum();
  }
  return detail::unary(a, std::move(v), [](Node* a, Node* o) {
    for (Eigen::Index r = 0; r < o->value.rows(); ++r) {
      const auto p = o->value.row(r).array();
      const auto g = o->grad.row(r).array();
      double dot = (g * p).sum();
      a->grad.row(r).array() += (g - dot) * p;
    }
  });
}

// -log(row[idx]) for a single row-stochastic row.
inline Var pick_neg_log(Var row, int idx) {
  CALM_CHECK(row.rows() == 1, "pick_neg_log: expected one row");
  CALM_CHECK(idx >= 0 && idx < row.cols(), "pick_neg_log: index out of range");
  double p = row.value()(0, idx);
  CALM_CHECK(p > 0.0, "pick_neg_log: zero probability");
  Matrix v(1, 1);
  v(0, 0) = -std::log(p);
  return detail::unary(row, std::move(v), [idx](Node* a, Node* o) {
    a->grad(0, idx) += o->grad(0, 0) * (-1.0 / a->value(0, idx));
  });
}

// Mean binary cross-entropy of posteriors p against 0/1 labels y, in nats.
// Posteriors are clamped to [eps, 1-eps] against sigmoid saturation.
inline Var bce(Var p, const Vector& y) {
  CALM_CHECK(p.cols() == 1 && p.rows() == y.size(), "bce: shape mismatch");
  static constexpr double eps = 1e-12;
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double pi = std::clamp(p.value()(i, 0), eps, 1.0 - eps);
    total += -(y(i) * std::log(pi) + (1.0 - y(i)) * std::log(1.0 - pi));
  }
  Matrix v(1, 1);
  v(0, 0) = total / static_cast<double>(y.size());
  return detail::unary(p, std::move(v), [y](Node* a, Node* o) {
    double inv = 1.0 / static_cast<double>(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      double pi = std::clamp(a->value(i, 0), eps, 1.0 - eps);
      a->grad(i, 0) += o->grad(0, 0) * inv * (pi - y(i)) / (pi * (1.0 - pi));
    }
  });
}

}  // namespace calm::ad

#endif  // CALM_AUTODIFF_HPP
