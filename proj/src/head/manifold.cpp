#include "dfd/manifold.hpp"

#include "dfd/error.hpp"

#include <cmath>
#include <map>

namespace dfd {

namespace {

// Interpolation weights s = a·x + b·y and their derivatives w.r.t. c = x·y.
struct SlerpWeights {
  double a;
  double b;
  double da_dc;
  double db_dc;
};

SlerpWeights slerp_weights(double theta, double t) {
  const double u = 1.0 - t;
  if (theta < kParallelAngle) return {u, t, 0.0, 0.0};
  const double s = std::sin(theta);
  const double a = std::sin(u * theta) / s;
  const double b = std::sin(t * theta) / s;
  if (theta < 1e-3) {
    // Series limits; the exact quotient loses all precision here.
    return {a, b, -u * (1.0 - u * u) / 3.0, -t * (1.0 - t * t) / 3.0};
  }
  const double c = std::cos(theta);
  const double da = (u * std::cos(u * theta) * s - std::sin(u * theta) * c) / (s * s);
  const double db = (t * std::cos(t * theta) * s - std::sin(t * theta) * c) / (s * s);
  return {a, b, -da / s, -db / s};
}

void require_unit(const Vector& v, const char* what) {
  if (std::abs(v.norm() - 1.0) > kUnitNormTolerance) {
    throw PreconditionError(std::string("slerp: ") + what + " is not unit length");
  }
}

void require_not_antipodal(const Vector& x, const Vector& y) {
  if ((x + y).norm() < kMinRowNorm) throw DegenerateError("slerp: antipodal pair has no unique geodesic");
}

}  // namespace

void FeatureBatch::validate() const {
  const auto b = static_cast<std::size_t>(features.rows());
  if (labels.size() != b || video_ids.size() != b) {
    throw ShapeError("feature batch: features, labels and video ids disagree in length");
  }
  for (int l : labels) {
    if (l != 0 && l != 1) throw InputError("feature batch: labels must be 0 or 1");
  }
  if (normalized) {
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      if (std::abs(features.row(i).norm() - 1.0) > kUnitNormTolerance) {
        throw PreconditionError("feature batch flagged normalized has a non-unit row");
      }
    }
  }
}

Matrix l2_normalize(const Matrix& features) {
  Matrix out = features;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (!(n >= kMinRowNorm)) throw DegenerateError("l2_normalize: row " + std::to_string(i) + " has (near) zero norm");
    out.row(i) /= n;
  }
  return out;
}

double geodesic_angle(const Vector& x, const Vector& y) { return 2.0 * std::atan2((x - y).norm(), (x + y).norm()); }

Vector slerp(const Vector& x, const Vector& y, double t) {
  if (x.size() != y.size()) throw ShapeError("slerp: vectors differ in length");
  if (!(t >= 0.0 && t <= 1.0)) throw PreconditionError("slerp: t must lie in [0, 1]");
  require_unit(x, "first argument");
  require_unit(y, "second argument");
  require_not_antipodal(x, y);
  const auto w = slerp_weights(geodesic_angle(x, y), t);
  Vector r = w.a * x + w.b * y;
  return r / r.norm();
}

std::string to_string(SlerpMode m) { return m == SlerpMode::replace ? "replace" : "append"; }

SlerpMode slerp_mode_from_string(const std::string& s) {
  if (s == "replace") return SlerpMode::replace;
  if (s == "append") return SlerpMode::append;
  throw ConfigError("unknown slerp mode '" + s + "'");
}

SlerpPlan plan_slerp(std::span<const int> labels, std::mt19937_64& rng) {
  std::map<int, std::vector<Eigen::Index>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<Eigen::Index>(i));
  SlerpPlan plan(labels.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& members = by_class[labels[i]];
    if (members.size() < 2) continue;
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 2);
    std::size_t k = pick(rng);
    // Skip over self so every other member is equally likely.
    if (members[k] >= static_cast<Eigen::Index>(i)) ++k;
    plan[i].partner = members[k];
    plan[i].t = unit(rng);
  }
  return plan;
}

Matrix apply_slerp_plan(const Matrix& unit_rows, const SlerpPlan& plan) {
  if (static_cast<Eigen::Index>(plan.size()) != unit_rows.rows()) throw ShapeError("slerp plan/batch size mismatch");
  Matrix out = unit_rows;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (plan[i].partner < 0) continue;
    const auto r = static_cast<Eigen::Index>(i);
    out.row(r) = slerp(unit_rows.row(r).transpose(), unit_rows.row(plan[i].partner).transpose(), plan[i].t).transpose();
  }
  return out;
}

FeatureBatch slerp_augment_batch(const FeatureBatch& batch, std::mt19937_64& rng, SlerpMode mode,
                                 SlerpPlan* pairing_log) {
  if (!batch.normalized) throw PreconditionError("slerp augmentation requires a normalized batch");
  batch.validate();
  const SlerpPlan plan = plan_slerp(batch.labels, rng);
  Matrix augmented = apply_slerp_plan(batch.features, plan);
  if (pairing_log) *pairing_log = plan;

  FeatureBatch out;
  out.normalized = true;
  if (mode == SlerpMode::replace) {
    out.features = std::move(augmented);
    out.labels = batch.labels;
    out.video_ids = batch.video_ids;
  } else {
    out.features.resize(batch.features.rows() * 2, batch.features.cols());
    out.features << batch.features, augmented;
    out.labels = batch.labels;
    out.labels.insert(out.labels.end(), batch.labels.begin(), batch.labels.end());
    out.video_ids = batch.video_ids;
    out.video_ids.insert(out.video_ids.end(), batch.video_ids.begin(), batch.video_ids.end());
  }
  return out;
}

Matrix classify(const Matrix& features, const HeadParams& params) {
  if (features.cols() != params.weight.rows()) throw ShapeError("classify: feature dim does not match head");
  if (params.weight.cols() != 2 || params.bias.size() != 2) throw ShapeError("classify: head must have 2 outputs");
  Matrix logits = features * params.weight;
  logits.rowwise() += params.bias;
  return logits;
}

Vector fake_scores(const Matrix& logits) {
  if (logits.cols() != 2) throw ShapeError("fake_scores: expected 2 logits per row");
  Vector s(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double d = logits(i, 1) - logits(i, 0);
    s(i) = d >= 0 ? 1.0 / (1.0 + std::exp(-d)) : std::exp(d) / (1.0 + std::exp(d));
  }
  return s;
}

ag::Var l2_normalize(const ag::Var& features) {
  const Matrix& x = features.value();
  Vector norms(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) norms(i) = x.row(i).norm();
  Matrix y = l2_normalize(x);
  Matrix ycopy = y;
  return ag::make_op(std::move(y), {features}, [ycopy, norms](ag::Node& out) {
    Vector dot = out.grad.cwiseProduct(ycopy).rowwise().sum();
    Matrix g = out.grad - (ycopy.array().colwise() * dot.array()).matrix();
    g = g.array().colwise() / norms.array();
    out.inputs[0]->accumulate(g);
  });
}

ag::Var slerp_rows(const ag::Var& unit_rows, const SlerpPlan& plan, SlerpMode mode) {
  const Matrix& x = unit_rows.value();
  const Eigen::Index n = x.rows();
  if (static_cast<Eigen::Index>(plan.size()) != n) throw ShapeError("slerp plan/batch size mismatch");

  Matrix augmented = apply_slerp_plan(x, plan);
  Matrix out;
  if (mode == SlerpMode::replace) {
    out = augmented;
  } else {
    out.resize(2 * n, x.cols());
    out << x, augmented;
  }
  const Eigen::Index offset = mode == SlerpMode::replace ? 0 : n;
  return ag::make_op(std::move(out), {unit_rows}, [x, augmented, plan, offset](ag::Node& node) {
    const Matrix& g = node.grad;
    Matrix gx = Matrix::Zero(x.rows(), x.cols());
    if (offset > 0) gx += g.topRows(offset);
    for (std::size_t i = 0; i < plan.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const Vector g_out = g.row(offset + r).transpose();
      if (plan[i].partner < 0) {
        gx.row(r) += g_out.transpose();
        continue;
      }
      const Vector xi = x.row(r).transpose();
      const Vector xj = x.row(plan[i].partner).transpose();
      const auto w = slerp_weights(geodesic_angle(xi, xj), plan[i].t);
      const Vector s = w.a * xi + w.b * xj;
      const double sn = s.norm();
      const Vector rr = s / sn;
      // Through the renormalization, then through s = a(c) x + b(c) y.
      const Vector gs = (g_out - rr * rr.dot(g_out)) / sn;
      const double k = gs.dot(w.da_dc * xi + w.db_dc * xj);
      gx.row(r) += (w.a * gs + k * xj).transpose();
      gx.row(plan[i].partner) += (w.b * gs + k * xi).transpose();
    }
    node.inputs[0]->accumulate(gx);
  });
}

ag::Var classify(const ag::Var& features, const ag::Var& weight, const ag::Var& bias) {
  if (features.cols() != weight.rows()) throw ShapeError("classify: feature dim does not match head");
  return ag::add_row(ag::matmul(features, weight), bias);
}

}  // namespace dfd
