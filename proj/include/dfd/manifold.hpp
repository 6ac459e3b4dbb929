#pragma once

// Hypersphere projection, linear two-class head and same-class slerp
// augmentation of classification-token features.

#include "dfd/autograd.hpp"

#include <random>
#include <span>
#include <string>
#include <vector>

namespace dfd {

inline constexpr double kUnitNormTolerance = 1e-5;
inline constexpr double kMinRowNorm = 1e-12;
// Below this geodesic angle slerp falls back to lerp + renormalization.
inline constexpr double kParallelAngle = 1e-6;

struct FeatureBatch {
  Matrix features;  // B x D
  std::vector<int> labels;  // 0 = real, 1 = fake
  std::vector<std::string> video_ids;
  bool normalized = false;

  Eigen::Index size() const { return features.rows(); }
  // Throws ShapeError / PreconditionError when the invariants do not hold.
  void validate() const;
};

struct HeadParams {
  Matrix weight;   // D x 2
  RowVector bias;  // 1 x 2
};

// Rows scaled to unit Euclidean norm; DegenerateError for rows with norm < 1e-12.
Matrix l2_normalize(const Matrix& features);

// Geodesic angle between unit vectors, computed as 2*atan2(|x-y|, |x+y|),
// which equals arccos(x.y) but stays accurate near 0 and pi.
double geodesic_angle(const Vector& x, const Vector& y);

// sin((1-t)θ)/sin θ · x + sin(tθ)/sin θ · y, renormalized. Requires unit inputs
// (PreconditionError otherwise); exact antipodes raise DegenerateError.
Vector slerp(const Vector& x, const Vector& y, double t);

// One row's augmentation draw. partner < 0 means the row passes through.
struct SlerpDraw {
  Eigen::Index partner = -1;
  double t = 0.0;
};
using SlerpPlan = std::vector<SlerpDraw>;

enum class SlerpMode { replace, append };
std::string to_string(SlerpMode m);
SlerpMode slerp_mode_from_string(const std::string& s);

// For each row, picks a partner uniformly among the other rows with the same
// label and t ~ U(0, 1). Rows that are alone in their class get no partner.
SlerpPlan plan_slerp(std::span<const int> labels, std::mt19937_64& rng);

// Replaces each planned row by slerp(row, partner, t).
Matrix apply_slerp_plan(const Matrix& unit_rows, const SlerpPlan& plan);

// Plans and applies same-class slerp. In append mode the augmented rows follow
// the originals (labels and video ids duplicated). `pairing_log`, when given,
// receives the plan that was applied.
FeatureBatch slerp_augment_batch(const FeatureBatch& batch, std::mt19937_64& rng,
                                 SlerpMode mode = SlerpMode::replace, SlerpPlan* pairing_log = nullptr);

// logits = features * W + b  (B x 2)
Matrix classify(const Matrix& features, const HeadParams& params);
// Softmax probability of class 1 (fake) per row.
Vector fake_scores(const Matrix& logits);

// Differentiable counterparts used by the trainer.
ag::Var l2_normalize(const ag::Var& features);
ag::Var slerp_rows(const ag::Var& unit_rows, const SlerpPlan& plan, SlerpMode mode = SlerpMode::replace);
ag::Var classify(const ag::Var& features, const ag::Var& weight, const ag::Var& bias);

}  // namespace dfd
