#include "dfd/losses.hpp"

#include "dfd/error.hpp"

#include <cmath>
#include <iostream>
#include <limits>

namespace dfd {

namespace {

void check_labels(std::span<const int> labels, Eigen::Index rows) {
  if (static_cast<Eigen::Index>(labels.size()) != rows) throw ShapeError("labels and rows differ in count");
  for (int l : labels) {
    if (l != 0 && l != 1) throw InputError("labels must be 0 (real) or 1 (fake), got " + std::to_string(l));
  }
}

double cross_entropy_impl(const Matrix& logits, std::span<const int> labels, Matrix* grad) {
  if (logits.cols() != 2) throw ShapeError("cross_entropy: expected B x 2 logits");
  if (logits.rows() < 1) throw InputError("cross_entropy: empty batch");
  check_labels(labels, logits.rows());
  const double inv_b = 1.0 / static_cast<double>(logits.rows());
  if (grad) grad->setZero(logits.rows(), 2);
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log(std::exp(logits(i, 0) - m) + std::exp(logits(i, 1) - m));
    total += lse - logits(i, labels[i]);
    if (grad) {
      for (int c = 0; c < 2; ++c) (*grad)(i, c) = (std::exp(logits(i, c) - lse) - (c == labels[i] ? 1.0 : 0.0)) * inv_b;
    }
  }
  return total * inv_b;
}

double alignment_impl(const Matrix& x, std::span<const int> labels, double alpha, Matrix* grad) {
  check_labels(labels, x.rows());
  if (!(alpha > 0.0)) throw ConfigError("alignment alpha must be positive");
  const Eigen::Index n = x.rows();
  if (grad) grad->setZero(n, x.cols());
  double sum = 0.0;
  std::size_t pairs = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (labels[i] != labels[j]) continue;
      ++pairs;
      const RowVector diff = x.row(i) - x.row(j);
      const double d = diff.norm();
      sum += std::pow(d, alpha);
      if (grad && d > 0.0) {
        const RowVector g = alpha * std::pow(d, alpha - 2.0) * diff;
        grad->row(i) += g;
        grad->row(j) -= g;
      }
    }
  }
  if (pairs == 0) throw UndefinedTermError("alignment: batch has no same-class pair");
  if (grad) *grad /= static_cast<double>(pairs);
  return sum / static_cast<double>(pairs);
}

double uniformity_impl(const Matrix& x, double t, Matrix* grad) {
  if (x.rows() < 2) throw UndefinedTermError("uniformity: needs at least two rows");
  if (!(t > 0.0)) throw ConfigError("uniformity t must be positive");
  const Eigen::Index n = x.rows();
  // log-mean-exp over pairs, stabilized by the largest exponent.
  Matrix expo = Matrix::Constant(n, n, -std::numeric_limits<double>::infinity());
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      expo(i, j) = -t * (x.row(i) - x.row(j)).squaredNorm();
      mx = std::max(mx, expo(i, j));
    }
  }
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) s += std::exp(expo(i, j) - mx);
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  if (grad) {
    grad->setZero(n, x.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double w = std::exp(expo(i, j) - mx) / s;
        const RowVector g = -2.0 * t * w * (x.row(i) - x.row(j));
        grad->row(i) += g;
        grad->row(j) -= g;
      }
    }
  }
  return mx + std::log(s) - std::log(pairs);
}

double supcon_impl(const Matrix& x, std::span<const int> labels, double tau, Matrix* grad) {
  check_labels(labels, x.rows());
  if (!(tau > 0.0)) throw ConfigError("supcon temperature must be positive");
  const Eigen::Index n = x.rows();
  const Matrix z = (x * x.transpose()) / tau;
  if (grad) grad->setZero(n, x.cols());
  double total = 0.0;
  std::size_t anchors = 0;
  Matrix dz = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t positives = 0;
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a == i) continue;
      mx = std::max(mx, z(i, a));
      if (labels[a] == labels[i]) ++positives;
    }
    if (positives == 0) continue;
    ++anchors;
    double s = 0.0;
    for (Eigen::Index a = 0; a < n; ++a)
      if (a != i) s += std::exp(z(i, a) - mx);
    const double lse = mx + std::log(s);
    double li = 0.0;
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a == i) continue;
      const bool pos = labels[a] == labels[i];
      if (pos) li += lse - z(i, a);
      dz(i, a) = std::exp(z(i, a) - lse) - (pos ? 1.0 / static_cast<double>(positives) : 0.0);
    }
    total += li / static_cast<double>(positives);
  }
  if (anchors == 0) throw UndefinedTermError("supcon: no anchor has a positive");
  const double inv = 1.0 / static_cast<double>(anchors);
  if (grad) {
    // z_ia = x_i . x_a / tau, so dL/dx = (dz + dz^T) x / tau.
    *grad = (dz + dz.transpose()) * x * (inv / tau);
  }
  return total * inv;
}

CompositeResult composite_impl(const Matrix& logits, const Matrix& features, std::span<const int> labels,
                               const LossWeights& w, bool want_grad) {
  w.validate();
  if (logits.rows() != features.rows()) throw ShapeError("composite: logits and features differ in rows");
  CompositeResult r;
  if (want_grad) {
    r.d_logits = Matrix::Zero(logits.rows(), logits.cols());
    r.d_features = Matrix::Zero(features.rows(), features.cols());
  }
  std::size_t computed = 0;
  auto add_term = [&](const char* name, double weight, auto&& fn, Matrix* dst) {
    if (weight == 0.0) return;
    Matrix g;
    try {
      const double v = fn(want_grad ? &g : nullptr);
      r.breakdown.per_term[name] = v;
      r.breakdown.total += weight * v;
      if (want_grad) *dst += weight * g;
      ++computed;
    } catch (const UndefinedTermError& e) {
      std::cerr << "[warn] skipping loss term " << name << ": " << e.what() << "\n";
      r.breakdown.skipped.emplace_back(name);
    }
  };
  add_term("ce", w.ce, [&](Matrix* g) { return cross_entropy_impl(logits, labels, g); }, &r.d_logits);
  add_term("alignment", w.alignment,
           [&](Matrix* g) { return alignment_impl(features, labels, w.alignment_alpha, g); }, &r.d_features);
  add_term("uniformity", w.uniformity, [&](Matrix* g) { return uniformity_impl(features, w.uniformity_t, g); },
           &r.d_features);
  add_term("supcon", w.supcon, [&](Matrix* g) { return supcon_impl(features, labels, w.supcon_temperature, g); },
           &r.d_features);
  if (computed == 0) throw UndefinedTermError("composite: every enabled loss term is undefined on this batch");
  return r;
}

}  // namespace

void LossWeights::validate() const {
  for (double v : {ce, alignment, uniformity, supcon}) {
    if (!(v >= 0.0)) throw ConfigError("loss weights must be nonnegative");
  }
  if (ce == 0.0 && alignment == 0.0 && uniformity == 0.0 && supcon == 0.0) {
    throw ConfigError("at least one loss weight must be positive");
  }
  if (!(supcon_temperature > 0.0) || !(uniformity_t > 0.0) || !(alignment_alpha > 0.0)) {
    throw ConfigError("loss temperature, t and alpha must be positive");
  }
}

double cross_entropy(const Matrix& logits, std::span<const int> labels) {
  return cross_entropy_impl(logits, labels, nullptr);
}

LossAndGrad cross_entropy_with_grad(const Matrix& logits, std::span<const int> labels) {
  LossAndGrad r;
  r.value = cross_entropy_impl(logits, labels, &r.grad);
  return r;
}

double alignment_loss(const Matrix& features, std::span<const int> labels, double alpha) {
  return alignment_impl(features, labels, alpha, nullptr);
}

LossAndGrad alignment_loss_with_grad(const Matrix& features, std::span<const int> labels, double alpha) {
  LossAndGrad r;
  r.value = alignment_impl(features, labels, alpha, &r.grad);
  return r;
}

double uniformity_loss(const Matrix& features, double t) { return uniformity_impl(features, t, nullptr); }

LossAndGrad uniformity_loss_with_grad(const Matrix& features, double t) {
  LossAndGrad r;
  r.value = uniformity_impl(features, t, &r.grad);
  return r;
}

double supcon_loss(const Matrix& features, std::span<const int> labels, double temperature) {
  return supcon_impl(features, labels, temperature, nullptr);
}

LossAndGrad supcon_loss_with_grad(const Matrix& features, std::span<const int> labels, double temperature) {
  LossAndGrad r;
  r.value = supcon_impl(features, labels, temperature, &r.grad);
  return r;
}

LossBreakdown composite(const Matrix& logits, const Matrix& features, std::span<const int> labels,
                        const LossWeights& weights) {
  return composite_impl(logits, features, labels, weights, false).breakdown;
}

CompositeResult composite_with_grad(const Matrix& logits, const Matrix& features, std::span<const int> labels,
                                    const LossWeights& weights) {
  return composite_impl(logits, features, labels, weights, true);
}

ag::Var composite_loss(const ag::Var& logits, const ag::Var& features, std::span<const int> labels,
                       const LossWeights& weights, LossBreakdown* breakdown) {
  auto r = composite_with_grad(logits.value(), features.value(), labels, weights);
  if (breakdown) *breakdown = r.breakdown;
  Matrix v(1, 1);
  v(0, 0) = r.breakdown.total;
  return ag::make_op(std::move(v), {logits, features},
                     [dl = std::move(r.d_logits), df = std::move(r.d_features)](ag::Node& out) {
                       const double g = out.grad(0, 0);
                       if (out.inputs[0]->requires_grad) out.inputs[0]->accumulate(g * dl);
                       if (out.inputs[1]->requires_grad) out.inputs[1]->accumulate(g * df);
                     });
}

}  // namespace dfd
