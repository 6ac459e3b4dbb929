#include "dfd/autograd.hpp"

#include "dfd/error.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_set>

namespace dfd::ag {

namespace {

thread_local bool g_reduced_precision = false;

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

Matrix maybe_round(Matrix m) {
  if (g_reduced_precision) {
    m = m.unaryExpr([](double v) { return round_to_bfloat16(v); });
  }
  return m;
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

void Node::zero_grad() { grad.resize(0, 0); }

Var constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var leaf(Matrix value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return Var(std::move(n));
}

Var make_op(Matrix value, std::vector<Var> inputs, std::function<void(Node& out)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (any) {
    n->requires_grad = true;
    n->inputs.reserve(inputs.size());
    for (auto& in : inputs) n->inputs.push_back(in.node());
    n->backward_fn = std::move(backward);
  }
  return Var(std::move(n));
}

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1) {
    throw ShapeError("backward: root must be a scalar");
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() != 0) n->backward_fn(*n);
  }
}

ReducedPrecisionScope::ReducedPrecisionScope(bool enabled) : previous_(g_reduced_precision) {
  g_reduced_precision = enabled;
}
ReducedPrecisionScope::~ReducedPrecisionScope() { g_reduced_precision = previous_; }
bool reduced_precision_enabled() { return g_reduced_precision; }

double round_to_bfloat16(double x) {
  if (!std::isfinite(x)) return x;
  auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(x));
  // Round to nearest even on the 16 dropped mantissa bits.
  const std::uint32_t lsb = (bits >> 16) & 1u;
  bits += 0x7FFFu + lsb;
  bits &= 0xFFFF0000u;
  return static_cast<double>(std::bit_cast<float>(bits));
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  return make_op(maybe_round(a.value() * b.value()), {a, b}, [](Node& out) {
    auto& a = *out.inputs[0];
    auto& b = *out.inputs[1];
    if (a.requires_grad) a.accumulate(out.grad * b.value.transpose());
    if (b.requires_grad) b.accumulate(a.value.transpose() * out.grad);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: inner dimensions differ");
  return make_op(maybe_round(a.value() * b.value().transpose()), {a, b}, [](Node& out) {
    auto& a = *out.inputs[0];
    auto& b = *out.inputs[1];
    if (a.requires_grad) a.accumulate(out.grad * b.value);
    if (b.requires_grad) b.accumulate(out.grad.transpose() * a.value);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  return make_op(a.value() + b.value(), {a, b}, [](Node& out) {
    for (auto& in : out.inputs) {
      if (in->requires_grad) in->accumulate(out.grad);
    }
  });
}

Var add_row(const Var& x, const Var& r) {
  if (r.rows() != 1 || r.cols() != x.cols()) throw ShapeError("add_row: row must be 1 x cols(x)");
  Matrix v = x.value().rowwise() + r.value().row(0);
  return make_op(std::move(v), {x, r}, [](Node& out) {
    auto& x = *out.inputs[0];
    auto& r = *out.inputs[1];
    if (x.requires_grad) x.accumulate(out.grad);
    if (r.requires_grad) r.accumulate(out.grad.colwise().sum());
  });
}

Var scale(const Var& x, double s) {
  return make_op(x.value() * s, {x}, [s](Node& out) { out.inputs[0]->accumulate(out.grad * s); });
}

Var quick_gelu(const Var& x) {
  static constexpr double k = 1.702;
  Matrix sig = (-k * x.value().array()).exp().matrix();
  sig = (1.0 + sig.array()).inverse().matrix();
  Matrix y = x.value().cwiseProduct(sig);
  return make_op(std::move(y), {x}, [sig](Node& out) {
    auto& x = *out.inputs[0];
    Matrix d = sig.array() + k * x.value.array() * sig.array() * (1.0 - sig.array());
    x.accumulate(out.grad.cwiseProduct(d));
  });
}

Var softmax_rows(const Var& x) {
  Matrix y = x.value();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double m = y.row(i).maxCoeff();
    y.row(i) = (y.row(i).array() - m).exp().matrix();
    y.row(i) /= y.row(i).sum();
  }
  Matrix ycopy = y;
  return make_op(std::move(y), {x}, [ycopy](Node& out) {
    Vector dot = out.grad.cwiseProduct(ycopy).rowwise().sum();
    Matrix d = ycopy.cwiseProduct(out.grad.colwise() - dot);
    out.inputs[0]->accumulate(d);
  });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Eigen::Index n = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n) {
    throw ShapeError("layer_norm: affine parameters must be 1 x cols(x)");
  }
  Vector mean = x.value().rowwise().mean();
  Matrix centered = x.value().colwise() - mean;
  Vector rstd = (centered.array().square().rowwise().sum() / static_cast<double>(n) + eps)
                    .rsqrt()
                    .matrix();
  Matrix xhat = centered.array().colwise() * rstd.array();
  Matrix y = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
             beta.value().row(0).array();
  return make_op(std::move(y), {x, gamma, beta}, [xhat, rstd](Node& out) {
    auto& x = *out.inputs[0];
    auto& gamma = *out.inputs[1];
    auto& beta = *out.inputs[2];
    if (gamma.requires_grad) gamma.accumulate(out.grad.cwiseProduct(xhat).colwise().sum());
    if (beta.requires_grad) beta.accumulate(out.grad.colwise().sum());
    if (x.requires_grad) {
      const double n = static_cast<double>(xhat.cols());
      Matrix dxhat = out.grad.array().rowwise() * gamma.value.row(0).array();
      Vector m1 = dxhat.rowwise().sum() / n;
      Vector m2 = dxhat.cwiseProduct(xhat).rowwise().sum() / n;
      Matrix dx = (dxhat.colwise() - m1) - (xhat.array().colwise() * m2.array()).matrix();
      dx = dx.array().colwise() * rstd.array();
      x.accumulate(dx);
    }
  });
}

Var slice_cols(const Var& x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x.cols()) throw ShapeError("slice_cols: out of range");
  const Eigen::Index total = x.cols();
  return make_op(x.value().middleCols(start, count), {x}, [start, count, total](Node& out) {
    Matrix g = Matrix::Zero(out.grad.rows(), total);
    g.middleCols(start, count) = out.grad;
    out.inputs[0]->accumulate(g);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != parts[0].rows()) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix v(parts[0].rows(), cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make_op(std::move(v), {parts.begin(), parts.end()}, [](Node& out) {
    Eigen::Index at = 0;
    for (auto& in : out.inputs) {
      const auto c = in->value.cols();
      if (in->requires_grad) in->accumulate(out.grad.middleCols(at, c));
      at += c;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != parts[0].cols()) throw ShapeError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix v(rows, parts[0].cols());
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return make_op(std::move(v), {parts.begin(), parts.end()}, [](Node& out) {
    Eigen::Index at = 0;
    for (auto& in : out.inputs) {
      const auto r = in->value.rows();
      if (in->requires_grad) in->accumulate(out.grad.middleRows(at, r));
      at += r;
    }
  });
}

Var row(const Var& x, Eigen::Index r) {
  if (r < 0 || r >= x.rows()) throw ShapeError("row: index out of range");
  const Eigen::Index rows = x.rows();
  return make_op(x.value().row(r), {x}, [r, rows](Node& out) {
    Matrix g = Matrix::Zero(rows, out.grad.cols());
    g.row(r) = out.grad.row(0);
    out.inputs[0]->accumulate(g);
  });
}

Var sum(const Var& x) {
  Matrix v(1, 1);
  v(0, 0) = x.value().sum();
  const auto r = x.rows();
  const auto c = x.cols();
  return make_op(std::move(v), {x}, [r, c](Node& out) {
    out.inputs[0]->accumulate(Matrix::Constant(r, c, out.grad(0, 0)));
  });
}

}  // namespace dfd::ag
