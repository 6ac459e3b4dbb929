#pragma once

#include "dfd/backbone.hpp"
#include "dfd/config.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace dfd {

// Snapshot of the trainable parameters only; the frozen backbone is
// referenced by `weights_hash` (checksum of every frozen tensor).
struct Checkpoint {
  int epoch = 0;
  double val_auroc = 0.0;
  std::string config_hash;
  std::string weights_hash;
  std::vector<std::pair<std::string, Matrix>> params;
  std::filesystem::path path;  // set once written
};

std::string frozen_weights_hash(const Model& model);

Checkpoint snapshot(const Model& model, int epoch, double val_auroc, const std::string& config_hash);
// Writes trainable tensors plus metadata (epoch, val_auroc, hashes, full config).
void save_checkpoint(const std::filesystem::path& path, Checkpoint& ckpt, const TrainConfig& cfg);

struct LoadedCheckpoint {
  Checkpoint checkpoint;
  TrainConfig config;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Copies snapshot values into the model. ShapeError / ConfigError on a
// mismatch; IntegrityError if the frozen backbone differs from the one the
// checkpoint was trained on.
void restore(Model& model, const Checkpoint& ckpt);

// Highest val_auroc; ties go to the earliest epoch. ConfigError when empty.
const Checkpoint& select_best(const std::vector<Checkpoint>& checkpoints);

}  // namespace dfd
