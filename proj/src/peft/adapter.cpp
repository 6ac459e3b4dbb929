#include "dfd/peft.hpp"

#include "dfd/error.hpp"

#include <fnmatch.h>

#include <cstdio>

namespace dfd {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_lora_factor(const std::string& name) { return ends_with(name, ".lora_A") || ends_with(name, ".lora_B"); }

bool is_head(const std::string& name) { return name == kHeadWeight || name == kHeadBias; }

std::string human_count(std::int64_t n) {
  char buf[32];
  if (n >= 1'000'000) {
    std::snprintf(buf, sizeof(buf), "%.2fM", static_cast<double>(n) / 1e6);
  } else if (n >= 1'000) {
    std::snprintf(buf, sizeof(buf), "%.2fK", static_cast<double>(n) / 1e3);
  } else {
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(n));
  }
  return buf;
}

}  // namespace

std::string to_string(PeftStrategy s) {
  switch (s) {
    case PeftStrategy::linear_probe: return "linear_probe";
    case PeftStrategy::ln_tuning: return "ln_tuning";
    case PeftStrategy::bias_tuning: return "bias_tuning";
    case PeftStrategy::lora: return "lora";
  }
  return "?";
}

PeftStrategy peft_strategy_from_string(const std::string& s) {
  if (s == "linear_probe") return PeftStrategy::linear_probe;
  if (s == "ln_tuning") return PeftStrategy::ln_tuning;
  if (s == "bias_tuning") return PeftStrategy::bias_tuning;
  if (s == "lora") return PeftStrategy::lora;
  throw ConfigError("unknown PEFT strategy '" + s + "'");
}

std::vector<std::string> default_target_patterns(PeftStrategy strategy) {
  switch (strategy) {
    case PeftStrategy::linear_probe: return {};
    case PeftStrategy::ln_tuning: return {"*layernorm.*", "*layer_norm?.*"};
    case PeftStrategy::bias_tuning: return {"encoder.layers.*.mlp.fc?.bias"};
    case PeftStrategy::lora:
      return {"encoder.layers.*.self_attn.q_proj.weight", "encoder.layers.*.self_attn.v_proj.weight"};
  }
  return {};
}

AdapterSpec AdapterSpec::defaults(PeftStrategy strategy) {
  AdapterSpec s;
  s.strategy = strategy;
  s.target_patterns = default_target_patterns(strategy);
  return s;
}

void AdapterSpec::validate() const {
  if (strategy == PeftStrategy::lora && lora_rank < 1) throw ConfigError("lora_rank must be >= 1");
  if (strategy == PeftStrategy::lora && !(lora_alpha > 0.0)) throw ConfigError("lora_alpha must be positive");
  if (strategy == PeftStrategy::linear_probe) {
    if (!target_patterns.empty()) throw ConfigError("linear_probe takes no target patterns");
  } else if (target_patterns.empty()) {
    throw ConfigError(to_string(strategy) + " requires at least one target pattern");
  }
}

bool glob_match(const std::string& pattern, const std::string& name) {
  return ::fnmatch(pattern.c_str(), name.c_str(), 0) == 0;
}

std::string TrainabilityReport::summary() const {
  char pct[32];
  std::snprintf(pct, sizeof(pct), "%.2f%%", 100.0 * fraction);
  return "trainable: " + human_count(trainable_count) + " / " + human_count(total_count) + " (" + pct + ")";
}

TrainabilityReport make_report(const NamedParameterTree& tree) {
  TrainabilityReport r;
  r.total_count = tree.total_count();
  r.trainable_count = tree.trainable_count();
  r.fraction = r.total_count > 0 ? static_cast<double>(r.trainable_count) / static_cast<double>(r.total_count) : 0.0;
  r.trainable_names = tree.trainable_names();
  return r;
}

std::pair<NamedParameterTree, TrainabilityReport> apply_adapter(const NamedParameterTree& tree,
                                                                const AdapterSpec& spec) {
  spec.validate();
  NamedParameterTree out = tree;
  out.freeze_all();
  if (!out.contains(kHeadWeight) || !out.contains(kHeadBias)) {
    throw ConfigError("parameter tree has no classifier head");
  }
  out.at(kHeadWeight).trainable = true;
  out.at(kHeadBias).trainable = true;

  // Snapshot: LoRA factors appended below must not be matched again.
  const std::vector<std::string> base_names = tree.names();
  for (const auto& pattern : spec.target_patterns) {
    std::size_t matched = 0;
    for (const auto& name : base_names) {
      if (is_head(name) || is_lora_factor(name) || !glob_match(pattern, name)) continue;
      ++matched;
      if (spec.strategy != PeftStrategy::lora) {
        out.at(name).trainable = true;
        continue;
      }
      const auto& shape = tree.at(name).shape;
      if (shape.size() != 2 || !ends_with(name, ".weight")) {
        throw ConfigError("lora target " + name + " is not a 2-D weight matrix");
      }
      const std::string prefix = name.substr(0, name.size() - std::string(".weight").size());
      const std::vector<std::int64_t> a_shape{spec.lora_rank, shape[1]};
      const std::vector<std::int64_t> b_shape{shape[0], spec.lora_rank};
      for (const auto& [fname, fshape] : {std::pair{prefix + ".lora_A", a_shape}, std::pair{prefix + ".lora_B", b_shape}}) {
        if (out.contains(fname)) {
          if (out.at(fname).shape != fshape) throw ConfigError("existing LoRA factor " + fname + " has another rank");
          out.at(fname).trainable = true;
        } else {
          out.add(fname, fshape, true);
        }
      }
    }
    if (matched == 0) {
      throw ConfigError("adapter pattern '" + pattern + "' matches no parameter");
    }
  }
  auto report = make_report(out);
  return {std::move(out), std::move(report)};
}

TrainabilityReport apply_adapter(Model& model, const AdapterSpec& spec, std::uint64_t seed) {
  auto [tree, report] = apply_adapter(model.tree(), spec);
  model.sync_tree(tree, seed);
  model.set_lora_alpha(spec.lora_alpha);
  return report;
}

Vector lora_forward(const Vector& input, const Matrix& frozen_weight, const LoraFactors& factors, double alpha) {
  if (frozen_weight.cols() != input.size()) throw ShapeError("lora_forward: weight/input mismatch");
  if (factors.down.cols() != input.size()) throw ShapeError("lora_forward: first factor/input mismatch");
  if (factors.up.cols() != factors.down.rows()) throw ShapeError("lora_forward: factor ranks differ");
  if (factors.up.rows() != frozen_weight.rows()) throw ShapeError("lora_forward: second factor/output mismatch");
  const double s = alpha / static_cast<double>(factors.down.rows());
  Vector out = frozen_weight * input;
  out += s * (factors.up * (factors.down * input));
  return out;
}

}  // namespace dfd
