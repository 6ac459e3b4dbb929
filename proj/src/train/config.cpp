#include "dfd/config.hpp"

#include "dfd/error.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace dfd {

namespace {

const char* const kSetupNames[] = {"linear_probe", "ln", "ln_norm", "ln_norm_unal", "ln_norm_unal_slerp"};

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key) && !j[key].is_null()) dst = j[key].get<T>();
}

}  // namespace

std::string to_string(Setup s) { return kSetupNames[static_cast<int>(s)]; }

Setup setup_from_string(const std::string& s) {
  for (int i = 0; i < 5; ++i) {
    if (s == kSetupNames[i]) return static_cast<Setup>(i);
  }
  throw ConfigError("unknown setup: " + s);
}

std::string to_string(Precision p) { return p == Precision::full ? "full" : "reduced"; }

Precision precision_from_string(const std::string& s) {
  if (s == "full") return Precision::full;
  if (s == "reduced") return Precision::reduced;
  throw ConfigError("precision must be 'full' or 'reduced', got " + s);
}

bool TrainConfig::pairwise_losses() const {
  return loss_weights.alignment > 0 || loss_weights.uniformity > 0 || loss_weights.supcon > 0 || slerp_features();
}

void TrainConfig::validate() const {
  encoder_spec_by_name(encoder);
  if (!(lr_initial > 0.0) || !(lr_final >= 0.0) || lr_final > lr_initial) {
    throw ConfigError("need 0 <= lr_final <= lr_initial and lr_initial > 0");
  }
  if (decay_epochs < 1 || epochs < 1) throw ConfigError("epochs and decay_epochs must be >= 1");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (pairwise_losses() && batch_size < 2) throw ConfigError("pairwise losses and slerp need batch_size >= 2");
  if (early_stopping_patience < 0) throw ConfigError("early_stopping_patience must be >= 0");
  if (validate_every < 1) throw ConfigError("validate_every must be >= 1");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ConfigError("betas must lie in [0, 1)");
  if (!(adam_eps > 0) || !(weight_decay >= 0)) throw ConfigError("adam eps must be > 0, weight_decay >= 0");
  loss_weights.validate();
  adapter.validate();
  augmentation.validate();
  data.split.validate();
  if (setup == Setup::linear_probe && adapter.strategy != PeftStrategy::linear_probe) {
    throw ConfigError("setup linear_probe requires adapter strategy linear_probe");
  }
  if (data.source != "manifest" && data.source != "synthetic") {
    throw ConfigError("data.source must be 'manifest' or 'synthetic'");
  }
  if (data.source == "synthetic") {
    const auto& s = data.synthetic;
    if (s.videos_per_class < 1 || s.frames_per_video < 1 || s.frames_per_video > 32 || s.side < 4) {
      throw ConfigError("synthetic data needs >= 1 video per class, 1..32 frames and side >= 4");
    }
    if (!(s.noise >= 0) || !(s.artifact_strength >= 0)) throw ConfigError("synthetic noise/strength must be >= 0");
  }
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = {{"ce", w.ce},
       {"alignment", w.alignment},
       {"uniformity", w.uniformity},
       {"supcon", w.supcon},
       {"supcon_temperature", w.supcon_temperature},
       {"uniformity_t", w.uniformity_t},
       {"alignment_alpha", w.alignment_alpha}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  read_if(j, "ce", w.ce);
  read_if(j, "alignment", w.alignment);
  read_if(j, "uniformity", w.uniformity);
  read_if(j, "supcon", w.supcon);
  read_if(j, "supcon_temperature", w.supcon_temperature);
  read_if(j, "uniformity_t", w.uniformity_t);
  read_if(j, "alignment_alpha", w.alignment_alpha);
}

void to_json(nlohmann::json& j, const AdapterSpec& a) {
  j = {{"strategy", to_string(a.strategy)},
       {"lora_rank", a.lora_rank},
       {"lora_alpha", a.lora_alpha},
       {"target_patterns", a.target_patterns}};
}

void from_json(const nlohmann::json& j, AdapterSpec& a) {
  const auto strategy = peft_strategy_from_string(j.at("strategy").get<std::string>());
  a = AdapterSpec::defaults(strategy);
  read_if(j, "lora_rank", a.lora_rank);
  read_if(j, "lora_alpha", a.lora_alpha);
  read_if(j, "target_patterns", a.target_patterns);
}

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
  j = {{"videos_per_class", s.videos_per_class}, {"frames_per_video", s.frames_per_video},
       {"side", s.side},                         {"noise", s.noise},
       {"artifact_strength", s.artifact_strength}, {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SyntheticSpec& s) {
  read_if(j, "videos_per_class", s.videos_per_class);
  read_if(j, "frames_per_video", s.frames_per_video);
  read_if(j, "side", s.side);
  read_if(j, "noise", s.noise);
  read_if(j, "artifact_strength", s.artifact_strength);
  read_if(j, "seed", s.seed);
}

void to_json(nlohmann::json& j, const DataConfig& d) {
  j = {{"source", d.source}, {"manifest", d.manifest}, {"root", d.root}, {"split", d.split}, {"synthetic", d.synthetic}};
}

void from_json(const nlohmann::json& j, DataConfig& d) {
  read_if(j, "source", d.source);
  read_if(j, "manifest", d.manifest);
  read_if(j, "root", d.root);
  read_if(j, "split", d.split);
  read_if(j, "synthetic", d.synthetic);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"setup", to_string(c.setup)},
       {"encoder", c.encoder},
       {"weights", c.weights},
       {"seed", c.seed},
       {"precision", to_string(c.precision)},
       {"lr_initial", c.lr_initial},
       {"lr_final", c.lr_final},
       {"decay_epochs", c.decay_epochs},
       {"epochs", c.epochs},
       {"max_steps", c.max_steps},
       {"betas", {c.beta1, c.beta2}},
       {"adam_eps", c.adam_eps},
       {"weight_decay", c.weight_decay},
       {"batch_size", c.batch_size},
       {"loss_weights", c.loss_weights},
       {"adapter", c.adapter},
       {"slerp_mode", to_string(c.slerp_mode)},
       {"augment", c.augment},
       {"augmentation", c.augmentation},
       {"early_stopping_patience", c.early_stopping_patience},
       {"validate_every", c.validate_every},
       {"data", c.data}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const std::vector<std::string> known{
        "setup",   "encoder",      "weights",     "seed",       "precision",    "lr_initial",
        "lr_final", "decay_epochs", "epochs",     "max_steps",  "betas",        "adam_eps",
        "weight_decay", "batch_size", "loss_weights", "adapter", "slerp_mode", "augment",
        "augmentation", "early_stopping_patience", "validate_every", "data"};
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw ConfigError("unknown config key: " + it.key());
    }
  }
  if (j.contains("setup")) c.setup = setup_from_string(j["setup"].get<std::string>());
  read_if(j, "encoder", c.encoder);
  read_if(j, "weights", c.weights);
  read_if(j, "seed", c.seed);
  if (j.contains("precision")) c.precision = precision_from_string(j["precision"].get<std::string>());
  read_if(j, "lr_initial", c.lr_initial);
  read_if(j, "lr_final", c.lr_final);
  read_if(j, "decay_epochs", c.decay_epochs);
  read_if(j, "epochs", c.epochs);
  read_if(j, "max_steps", c.max_steps);
  if (j.contains("betas")) {
    const auto b = j["betas"].get<std::vector<double>>();
    if (b.size() != 2) throw ConfigError("betas must have two entries");
    c.beta1 = b[0];
    c.beta2 = b[1];
  }
  read_if(j, "adam_eps", c.adam_eps);
  read_if(j, "weight_decay", c.weight_decay);
  read_if(j, "batch_size", c.batch_size);
  read_if(j, "loss_weights", c.loss_weights);
  read_if(j, "adapter", c.adapter);
  if (j.contains("slerp_mode")) c.slerp_mode = slerp_mode_from_string(j["slerp_mode"].get<std::string>());
  read_if(j, "augment", c.augment);
  read_if(j, "augmentation", c.augmentation);
  read_if(j, "early_stopping_patience", c.early_stopping_patience);
  read_if(j, "validate_every", c.validate_every);
  read_if(j, "data", c.data);
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (int i = 1; i <= 5; ++i) out.push_back("setup" + std::to_string(i));
  for (int i = 1; i <= 5; ++i) out.push_back("toy-setup" + std::to_string(i));
  return out;
}

namespace {

TrainConfig full_preset(int n) {
  TrainConfig c;
  c.setup = static_cast<Setup>(n - 1);
  c.adapter = AdapterSpec::defaults(n == 1 ? PeftStrategy::linear_probe : PeftStrategy::ln_tuning);
  c.loss_weights = LossWeights{};
  if (n >= 4) {
    c.loss_weights.alignment = 0.1;
    c.loss_weights.uniformity = 0.1;
  }
  c.data.split.val_fraction_from_test = {{"*", 0.15}};
  return c;
}

}  // namespace

TrainConfig toy_preset(int n) {
  if (n < 1 || n > 5) throw ConfigError("setup number must be 1..5");
  TrainConfig c = full_preset(n);
  c.encoder = "toy";
  c.batch_size = 32;
  // Same 8:5 initial-to-final ratio as the full recipe, scaled for a width-8 encoder.
  c.lr_initial = 5e-2;
  c.lr_final = 3.125e-2;
  c.epochs = 4;
  c.decay_epochs = 4;
  c.max_steps = 200;
  c.data.source = "synthetic";
  c.data.synthetic = SyntheticSpec{};
  c.data.split = SplitSpec{};
  return c;
}

std::optional<TrainConfig> preset(const std::string& name) {
  for (int i = 1; i <= 5; ++i) {
    if (name == "setup" + std::to_string(i)) return full_preset(i);
    if (name == "toy-setup" + std::to_string(i)) return toy_preset(i);
  }
  return std::nullopt;
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError("override references unknown key: " + key);
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }

  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  if (node->is_number() && !value.is_number()) throw ConfigError("override " + key + " expects a number");
  if (node->is_boolean() && !value.is_boolean()) throw ConfigError("override " + key + " expects true/false");
  if (node->is_string() && !value.is_string()) value = raw;
  if (node->is_array() && !value.is_array()) throw ConfigError("override " + key + " expects a JSON array");
  if (node->is_object() && !value.is_object()) throw ConfigError("override " + key + " expects a JSON object");
  *node = std::move(value);
}

TrainConfig load_config(const std::string& name_or_path, const std::vector<std::string>& overrides) {
  nlohmann::json j;
  if (auto p = preset(name_or_path); p && !std::filesystem::exists(name_or_path)) {
    j = *p;
  } else {
    std::ifstream in(name_or_path);
    if (!in) throw ConfigError("config is neither a preset name nor a readable file: " + name_or_path);
    try {
      // Start from the defaults so the file may omit keys.
      nlohmann::json file = nlohmann::json::parse(in);
      TrainConfig base;
      base = file.get<TrainConfig>();
      j = base;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(name_or_path + ": " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(j, o);
  TrainConfig cfg;
  try {
    cfg = j.get<TrainConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config after overrides: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string config_hash(const TrainConfig& cfg) {
  const std::string s = nlohmann::json(cfg).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return hex64(h);
}

}  // namespace dfd
