#pragma once

#include "dfd/checkpoint.hpp"
#include "dfd/config.hpp"
#include "dfd/dataset.hpp"
#include "dfd/losses.hpp"
#include "dfd/metrics.hpp"
#include "dfd/peft.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace dfd {

// Scheduled learning rate: cosine from lr_initial to lr_final over
// `total_steps`. ConfigError if total_steps <= 0 or step is out of range.
double lr_at(long step, long total_steps, const TrainConfig& cfg);

// Backbone from cfg (weights file or $DFD_WEIGHTS; toy may init randomly
// from cfg.seed) with the adapter applied.
Model prepare_model(const TrainConfig& cfg, TrainabilityReport* report = nullptr);

struct StepRecord {
  long step = 0;
  int epoch = 0;
  double lr = 0.0;
  LossBreakdown loss;
};

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  long steps = 0;
  bool validated = false;
  double val_auroc = 0.0;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // metrics.jsonl + checkpoints/; empty keeps everything in memory
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<Checkpoint> checkpoints;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::uint64_t frozen_checksum_before = 0;
  std::uint64_t frozen_checksum_after = 0;
  long total_steps = 0;
};

// Adam + cosine schedule over shuffled batches. Each step: encode, optional
// L2 normalization, optional same-class slerp, linear head, composite loss.
// After each validated epoch, video-level validation AUROC and a checkpoint.
// ConfigError on an empty train split; TrainingError on a non-finite loss
// (a diagnostic JSON lands in out_dir first).
TrainResult train(const TrainConfig& cfg, const FrameDataset& train_set, const FrameDataset& val_set, Model& model,
                  const TrainOptions& opts = {});

// Per-frame fake probabilities with the head (and normalization) the config implies.
PredictionSet predict(const Model& model, const TrainConfig& cfg, const FrameDataset& ds, std::size_t batch = 64);

}  // namespace dfd
