#pragma once

// Minimal reverse-mode differentiation over dense 2-D matrices.
//
// Every value is an Eigen matrix held by a graph Node. Operations build new
// nodes that remember their inputs and a backward closure only when at least
// one input requires a gradient, so pure inference never allocates a graph.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace dfd {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using Vector = Eigen::VectorXd;

namespace ag {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  void accumulate(const Matrix& g);
  void zero_grad();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  const std::shared_ptr<Node>& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

// Leaf holding a value that never receives gradient.
Var constant(Matrix value);
// Leaf that accumulates gradient when requires_grad is set.
Var leaf(Matrix value, bool requires_grad);

// Builds a node from a precomputed value. `backward` receives the output node
// (with its grad filled) and must accumulate into the inputs that require it.
Var make_op(Matrix value, std::vector<Var> inputs,
            std::function<void(Node& out)> backward);

// Seeds d(root)/d(root) = 1 and propagates through the graph. root must be 1x1.
void backward(const Var& root);

// When enabled, matmul outputs are rounded to bfloat16 on the forward pass.
// Gradients pass straight through in full precision.
class ReducedPrecisionScope {
 public:
  explicit ReducedPrecisionScope(bool enabled);
  ~ReducedPrecisionScope();
  ReducedPrecisionScope(const ReducedPrecisionScope&) = delete;
  ReducedPrecisionScope& operator=(const ReducedPrecisionScope&) = delete;

 private:
  bool previous_;
};
bool reduced_precision_enabled();
double round_to_bfloat16(double x);

Var matmul(const Var& a, const Var& b);      // a * b
Var matmul_nt(const Var& a, const Var& b);   // a * b^T
Var add(const Var& a, const Var& b);
Var add_row(const Var& x, const Var& row);   // broadcast a 1xN row over x
Var scale(const Var& x, double s);
Var quick_gelu(const Var& x);                // x * sigmoid(1.702 x)
Var softmax_rows(const Var& x);
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps);
Var slice_cols(const Var& x, Eigen::Index start, Eigen::Index count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var row(const Var& x, Eigen::Index r);
Var sum(const Var& x);

}  // namespace ag
}  // namespace dfd
