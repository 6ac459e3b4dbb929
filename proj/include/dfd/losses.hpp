#pragma once

// Training objective terms over logits and (normalized) features. Every term
// has a closed-form gradient; the trainer plugs them into the graph as
// single nodes.

#include "dfd/autograd.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace dfd {

struct LossWeights {
  double ce = 1.0;
  double alignment = 0.0;
  double uniformity = 0.0;
  double supcon = 0.0;
  double supcon_temperature = 0.1;
  double uniformity_t = 2.0;
  double alignment_alpha = 2.0;

  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  std::map<std::string, double> per_term;  // unweighted term values
  std::vector<std::string> skipped;        // enabled terms undefined on this batch
};

struct LossAndGrad {
  double value = 0.0;
  Matrix grad;  // same shape as the differentiated input
};

// Mean -log softmax(logits)[label]. Labels must be 0 or 1.
double cross_entropy(const Matrix& logits, std::span<const int> labels);
LossAndGrad cross_entropy_with_grad(const Matrix& logits, std::span<const int> labels);

// Mean over same-class pairs i<j of |x_i - x_j|^alpha.
double alignment_loss(const Matrix& features, std::span<const int> labels, double alpha);
LossAndGrad alignment_loss_with_grad(const Matrix& features, std::span<const int> labels, double alpha);

// log of the mean over all pairs i<j of exp(-t |x_i - x_j|^2).
double uniformity_loss(const Matrix& features, double t);
LossAndGrad uniformity_loss_with_grad(const Matrix& features, double t);

// Supervised contrastive loss: for each anchor with at least one positive,
// the mean over positives p of -log(exp(x_i.x_p/τ) / Σ_{a≠i} exp(x_i.x_a/τ)),
// averaged over those anchors.
double supcon_loss(const Matrix& features, std::span<const int> labels, double temperature);
LossAndGrad supcon_loss_with_grad(const Matrix& features, std::span<const int> labels, double temperature);

struct CompositeResult {
  LossBreakdown breakdown;
  Matrix d_logits;
  Matrix d_features;
};

// Weighted sum of enabled terms; zero-weight terms are not evaluated.
// Undefined terms are skipped with a warning.
LossBreakdown composite(const Matrix& logits, const Matrix& features, std::span<const int> labels,
                        const LossWeights& weights);
CompositeResult composite_with_grad(const Matrix& logits, const Matrix& features, std::span<const int> labels,
                                    const LossWeights& weights);

// Graph node whose value is composite(...).total.
ag::Var composite_loss(const ag::Var& logits, const ag::Var& features, std::span<const int> labels,
                       const LossWeights& weights, LossBreakdown* breakdown = nullptr);

}  // namespace dfd
