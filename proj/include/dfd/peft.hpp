#pragma once

#include "dfd/backbone.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dfd {

enum class PeftStrategy { linear_probe, ln_tuning, bias_tuning, lora };

std::string to_string(PeftStrategy s);
PeftStrategy peft_strategy_from_string(const std::string& s);

// Which backbone parameters train, and how. Patterns are globs over
// dot-separated parameter names ('*' spans any characters, '?' one).
struct AdapterSpec {
  PeftStrategy strategy = PeftStrategy::linear_probe;
  int lora_rank = 1;
  double lora_alpha = 1.0;
  std::vector<std::string> target_patterns;

  // Strategy with its stock target patterns.
  static AdapterSpec defaults(PeftStrategy strategy);
  void validate() const;
};

std::vector<std::string> default_target_patterns(PeftStrategy strategy);

struct TrainabilityReport {
  std::int64_t trainable_count = 0;
  std::int64_t total_count = 0;
  double fraction = 0.0;
  std::vector<std::string> trainable_names;

  // "trainable: 104.45K / 303.18M (0.03%)"
  std::string summary() const;
};

bool glob_match(const std::string& pattern, const std::string& name);

// Returns a copy of `tree` where exactly the parameters selected by `spec`
// (plus the classifier head) are trainable. Prior trainability is reset, so
// applying the same spec twice yields the same tree. For lora, each targeted
// weight W[out, in] stays frozen and gains trainable factors
// `<prefix>.lora_A` [rank, in] and `<prefix>.lora_B` [out, rank].
std::pair<NamedParameterTree, TrainabilityReport> apply_adapter(const NamedParameterTree& tree,
                                                                const AdapterSpec& spec);

// Applies the adapter to a live model (materializing LoRA factors).
TrainabilityReport apply_adapter(Model& model, const AdapterSpec& spec, std::uint64_t seed);

struct LoraFactors {
  Matrix down;  // rank x in
  Matrix up;    // out x rank
};

// frozen_weight * input + (alpha / rank) * up * down * input
Vector lora_forward(const Vector& input, const Matrix& frozen_weight, const LoraFactors& factors, double alpha);

TrainabilityReport make_report(const NamedParameterTree& tree);

}  // namespace dfd
