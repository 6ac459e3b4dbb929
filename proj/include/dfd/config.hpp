#pragma once

#include "dfd/augment.hpp"
#include "dfd/losses.hpp"
#include "dfd/manifold.hpp"
#include "dfd/peft.hpp"
#include "dfd/split.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dfd {

enum class Setup { linear_probe, ln, ln_norm, ln_norm_unal, ln_norm_unal_slerp };
enum class Precision { full, reduced };

std::string to_string(Setup s);
Setup setup_from_string(const std::string& s);
std::string to_string(Precision p);
Precision precision_from_string(const std::string& s);

struct SyntheticSpec {
  int videos_per_class = 64;
  int frames_per_video = 16;
  int side = 16;
  double noise = 12.0;              // per-pixel Gaussian sigma, 8-bit units
  double artifact_strength = 64.0;  // fake-only blue shift in the face region
  std::uint64_t seed = 0;
};

struct DataConfig {
  std::string source = "manifest";  // "manifest" or "synthetic"
  std::string manifest;             // JSONL, relative to root unless absolute
  std::string root;                 // data root; empty -> $DFD_DATA_ROOT or the manifest's directory
  SplitSpec split;
  SyntheticSpec synthetic;
};

struct TrainConfig {
  Setup setup = Setup::ln_norm_unal_slerp;
  std::string encoder = "clip-vit-l14";
  std::string weights;  // empty -> $DFD_WEIGHTS
  std::uint64_t seed = 0;
  Precision precision = Precision::reduced;

  double lr_initial = 8e-5;
  double lr_final = 5e-5;
  int decay_epochs = 50;
  int epochs = 50;
  long max_steps = 0;  // 0 = no cap
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  int batch_size = 128;

  LossWeights loss_weights;
  AdapterSpec adapter = AdapterSpec::defaults(PeftStrategy::ln_tuning);
  SlerpMode slerp_mode = SlerpMode::replace;
  bool augment = true;
  AugmentParams augmentation;
  int early_stopping_patience = 0;  // epochs without improvement; 0 disables
  int validate_every = 1;           // epochs
  DataConfig data;

  bool normalize_features() const { return setup != Setup::linear_probe && setup != Setup::ln; }
  bool slerp_features() const { return setup == Setup::ln_norm_unal_slerp; }
  bool pairwise_losses() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);
void to_json(nlohmann::json& j, const AdapterSpec& a);
void from_json(const nlohmann::json& j, AdapterSpec& a);
void to_json(nlohmann::json& j, const SyntheticSpec& s);
void from_json(const nlohmann::json& j, SyntheticSpec& s);
void to_json(nlohmann::json& j, const DataConfig& d);
void from_json(const nlohmann::json& j, DataConfig& d);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// Presets "setup1".."setup5" (full recipe) and "toy-setup1".."toy-setup5"
// (toy encoder, synthetic data, scaled-down schedule).
std::vector<std::string> preset_names();
std::optional<TrainConfig> preset(const std::string& name);
TrainConfig toy_preset(int setup_number);

// `key.path=value`. The key must already exist in `j`; the value is parsed
// as JSON when possible, else taken as a string. ConfigError otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

// A preset name or a path to a JSON file, followed by overrides.
TrainConfig load_config(const std::string& name_or_path, const std::vector<std::string>& overrides = {});

// FNV-1a of the canonical JSON, as 16 hex digits.
std::string config_hash(const TrainConfig& cfg);
std::string hex64(std::uint64_t v);

}  // namespace dfd
