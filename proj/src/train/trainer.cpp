#include "dfd/trainer.hpp"

#include "dfd/adam.hpp"
#include "dfd/augment.hpp"
#include "dfd/bounded_queue.hpp"
#include "dfd/error.hpp"
#include "dfd/manifold.hpp"
#include "dfd/schedule.hpp"

#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

namespace dfd {

namespace {

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

enum Stream : std::uint64_t { kShuffle = 1, kAugment = 2, kSlerp = 3, kHead = 4 };

struct Batch {
  std::vector<ImageTensor> images;
  std::vector<int> labels;
  std::vector<std::string> video_ids;
};

nlohmann::json step_json(const StepRecord& s) {
  return {{"type", "step"},         {"step", s.step},
          {"epoch", s.epoch},       {"lr", s.lr},
          {"loss", s.loss.total},   {"terms", s.loss.per_term},
          {"skipped", s.loss.skipped}};
}

nlohmann::json epoch_json(const EpochRecord& e) {
  nlohmann::json j = {{"type", "epoch"}, {"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"steps", e.steps}};
  if (e.validated) j["val_auroc"] = e.val_auroc;
  return j;
}

// Feeds one epoch of prepared batches through a bounded queue.
class BatchProducer {
 public:
  BatchProducer(const FrameDataset& ds, const Model& model, const TrainConfig& cfg,
                std::vector<std::vector<std::size_t>> order, std::mt19937_64& aug_rng)
      : queue_(2) {
    thread_ = std::thread([this, &ds, &model, &cfg, order = std::move(order), &aug_rng] {
      try {
        for (const auto& idx : order) {
          Batch b;
          b.images.reserve(idx.size());
          for (std::size_t i : idx) {
            const FrameRef& f = ds.frames[i];
            const cv::Mat img = augment_image(load_frame(f), aug_rng, cfg.augmentation, cfg.augment);
            b.images.push_back(model.preprocess(img));
            b.labels.push_back(f.label);
            b.video_ids.push_back(f.video_id);
          }
          if (!queue_.push(std::move(b))) return;
        }
      } catch (...) {
        error_ = std::current_exception();
      }
      queue_.close();
    });
  }

  ~BatchProducer() {
    queue_.close();
    if (thread_.joinable()) thread_.join();
  }

  std::optional<Batch> next() {
    auto b = queue_.pop();
    if (!b && error_) std::rethrow_exception(error_);
    return b;
  }

 private:
  BoundedQueue<Batch> queue_;
  std::exception_ptr error_;
  std::thread thread_;
};

void write_nan_diagnostic(const std::filesystem::path& out_dir, const StepRecord& rec, const Batch& batch,
                          const Model& model) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& name : model.tree().trainable_names()) {
    const Matrix& v = model.value(name);
    params[name] = {{"norm", v.norm()}, {"finite", v.allFinite()}};
  }
  nlohmann::json j = {{"step", rec.step},   {"epoch", rec.epoch},          {"lr", rec.lr},
                      {"terms", rec.loss.per_term}, {"video_ids", batch.video_ids}, {"labels", batch.labels},
                      {"trainable", params}};
  std::filesystem::create_directories(out_dir);
  std::ofstream(out_dir / "nan_diagnostic.json") << j.dump(2) << '\n';
}

}  // namespace

double lr_at(long step, long total_steps, const TrainConfig& cfg) {
  return cosine_lr(step, total_steps, cfg.lr_initial, cfg.lr_final);
}

Model prepare_model(const TrainConfig& cfg, TrainabilityReport* report) {
  cfg.validate();
  const auto spec = encoder_spec_by_name(cfg.encoder);
  std::optional<std::filesystem::path> weights;
  if (!cfg.weights.empty()) weights = cfg.weights;
  Model model = Model::create(spec, weights, stream_seed(cfg.seed, kHead));
  auto r = apply_adapter(model, cfg.adapter, cfg.seed);
  if (report) *report = r;
  return model;
}

PredictionSet predict(const Model& model, const TrainConfig& cfg, const FrameDataset& ds, std::size_t batch) {
  if (batch == 0) batch = 1;
  ag::ReducedPrecisionScope precision(cfg.precision == Precision::reduced);
  PredictionSet out;
  out.dataset_tag = ds.tag;
  out.labels = ds.video_labels();
  HeadParams head{model.value(kHeadWeight), model.value(kHeadBias)};
  for (std::size_t start = 0; start < ds.frames.size(); start += batch) {
    const std::size_t end = std::min(ds.frames.size(), start + batch);
    std::vector<ImageTensor> images;
    for (std::size_t i = start; i < end; ++i) images.push_back(model.preprocess(load_frame(ds.frames[i])));
    Matrix feats = model.encode(images);
    if (cfg.normalize_features()) feats = l2_normalize(feats);
    const Vector scores = fake_scores(classify(feats, head));
    for (std::size_t i = start; i < end; ++i) {
      out.records.push_back({ds.frames[i].video_id, ds.frames[i].frame_index, scores(static_cast<Eigen::Index>(i - start))});
    }
  }
  return out;
}

TrainResult train(const TrainConfig& cfg, const FrameDataset& train_set, const FrameDataset& val_set, Model& model,
                  const TrainOptions& opts) {
  cfg.validate();
  if (train_set.frames.empty()) throw ConfigError("train split is empty");
  if (val_set.frames.empty()) throw ConfigError("validation split is empty");
  if (model.spec().name != encoder_spec_by_name(cfg.encoder).name) {
    throw ConfigError("model encoder does not match config encoder " + cfg.encoder);
  }

  const std::size_t min_last = cfg.pairwise_losses() ? 2 : 1;
  const long steps_per_epoch = static_cast<long>(
      make_batches(train_set.frames.size(), static_cast<std::size_t>(cfg.batch_size), 0, min_last).size());
  const long schedule_steps = steps_per_epoch * cfg.decay_epochs;
  const std::string chash = config_hash(cfg);

  std::ofstream log;
  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir / "checkpoints");
    log.open(opts.out_dir / "metrics.jsonl", std::ios::trunc);
    if (!log) throw InputError("cannot write metrics log in " + opts.out_dir.string());
  }

  TrainResult result;
  const auto frozen = model.frozen_names();
  result.frozen_checksum_before = model.checksum(frozen);
  Adam adam({cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay}, model.tree().trainable_names());
  std::mt19937_64 aug_rng(stream_seed(cfg.seed, kAugment));
  std::mt19937_64 slerp_rng(stream_seed(cfg.seed, kSlerp));
  const ag::Var head_w = model.param(kHeadWeight);
  const ag::Var head_b = model.param(kHeadBias);

  long step = 0;
  double best_auroc = -1.0;
  int since_best = 0;
  bool stop = false;
  model.zero_grad();
  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    auto order = make_batches(train_set.frames.size(), static_cast<std::size_t>(cfg.batch_size),
                              stream_seed(cfg.seed, kShuffle * 1000 + static_cast<std::uint64_t>(epoch)), min_last);
    EpochRecord er;
    er.epoch = epoch;
    double loss_sum = 0.0;
    {
      BatchProducer producer(train_set, model, cfg, std::move(order), aug_rng);
      while (auto batch = producer.next()) {
        StepRecord rec;
        rec.step = step;
        rec.epoch = epoch;
        rec.lr = cosine_lr_with_floor(step, schedule_steps, cfg.lr_initial, cfg.lr_final);
        {
          ag::ReducedPrecisionScope precision(cfg.precision == Precision::reduced);
          ag::Var z = model.forward_batch(batch->images);
          if (cfg.normalize_features()) z = l2_normalize(z);
          std::vector<int> labels = batch->labels;
          if (cfg.slerp_features()) {
            const auto plan = plan_slerp(labels, slerp_rng);
            z = slerp_rows(z, plan, cfg.slerp_mode);
            if (cfg.slerp_mode == SlerpMode::append) labels.insert(labels.end(), batch->labels.begin(), batch->labels.end());
          }
          const ag::Var logits = classify(z, head_w, head_b);
          const ag::Var loss = composite_loss(logits, z, labels, cfg.loss_weights, &rec.loss);
          if (!std::isfinite(rec.loss.total)) {
            if (!opts.out_dir.empty()) write_nan_diagnostic(opts.out_dir, rec, *batch, model);
            throw TrainingError("non-finite loss at step " + std::to_string(step) + " (epoch " +
                                std::to_string(epoch) + ")");
          }
          ag::backward(loss);
        }
        adam.step(model, rec.lr);
        model.zero_grad();

        loss_sum += rec.loss.total;
        ++er.steps;
        ++step;
        if (log.is_open()) log << step_json(rec).dump() << '\n';
        if (opts.on_step) opts.on_step(rec);
        result.steps.push_back(std::move(rec));
        if (cfg.max_steps > 0 && step >= cfg.max_steps) {
          stop = true;
          break;
        }
      }
    }
    er.mean_loss = er.steps > 0 ? loss_sum / static_cast<double>(er.steps) : 0.0;

    const bool last = stop || epoch + 1 == cfg.epochs;
    if ((epoch + 1) % cfg.validate_every == 0 || last) {
      er.validated = true;
      er.val_auroc = video_auroc(predict(model, cfg, val_set));
      Checkpoint ck = snapshot(model, epoch, er.val_auroc, chash);
      if (!opts.out_dir.empty()) {
        char name[32];
        std::snprintf(name, sizeof(name), "epoch_%03d.safetensors", epoch);
        save_checkpoint(opts.out_dir / "checkpoints" / name, ck, cfg);
      }
      result.checkpoints.push_back(std::move(ck));
      if (er.val_auroc > best_auroc) {
        best_auroc = er.val_auroc;
        since_best = 0;
      } else if (cfg.early_stopping_patience > 0 && ++since_best >= cfg.early_stopping_patience) {
        stop = true;
      }
    }
    if (log.is_open()) log << epoch_json(er).dump() << '\n' << std::flush;
    if (opts.on_epoch) opts.on_epoch(er);
    result.epochs.push_back(er);
  }

  result.total_steps = step;
  result.frozen_checksum_after = model.checksum(frozen);
  if (result.frozen_checksum_after != result.frozen_checksum_before) {
    throw TrainingError("frozen parameters changed during training");
  }
  return result;
}

}  // namespace dfd
