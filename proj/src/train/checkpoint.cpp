#include "dfd/checkpoint.hpp"

#include "dfd/error.hpp"
#include "dfd/safetensors.hpp"

#include <cstdio>

namespace dfd {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string frozen_weights_hash(const Model& model) { return hex64(model.checksum(model.frozen_names())); }

Checkpoint snapshot(const Model& model, int epoch, double val_auroc, const std::string& config_hash) {
  Checkpoint c;
  c.epoch = epoch;
  c.val_auroc = val_auroc;
  c.config_hash = config_hash;
  c.weights_hash = frozen_weights_hash(model);
  for (const auto& name : model.tree().trainable_names()) c.params.emplace_back(name, model.value(name));
  return c;
}

void save_checkpoint(const std::filesystem::path& path, Checkpoint& ckpt, const TrainConfig& cfg) {
  std::vector<std::pair<std::string, safetensors::Tensor>> tensors;
  for (const auto& [name, m] : ckpt.params) {
    safetensors::Tensor t;
    t.shape = {m.rows(), m.cols()};
    t.data.resize(static_cast<std::size_t>(m.size()));
    Eigen::Map<RowMajorMatrix>(t.data.data(), m.rows(), m.cols()) = m;
    tensors.emplace_back(name, std::move(t));
  }
  const std::map<std::string, std::string> meta{{"epoch", std::to_string(ckpt.epoch)},
                                                {"val_auroc", format_double(ckpt.val_auroc)},
                                                {"config_hash", ckpt.config_hash},
                                                {"weights_hash", ckpt.weights_hash},
                                                {"config", nlohmann::json(cfg).dump()}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  safetensors::write(path, tensors, meta);
  ckpt.path = path;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const auto file = safetensors::File::open(path);
  const auto& meta = file.metadata();
  auto get = [&](const char* key) {
    auto it = meta.find(key);
    if (it == meta.end()) throw IntegrityError(path.string() + ": checkpoint metadata lacks " + key);
    return it->second;
  };
  LoadedCheckpoint out;
  out.config = nlohmann::json::parse(get("config")).get<TrainConfig>();
  auto& c = out.checkpoint;
  c.epoch = std::stoi(get("epoch"));
  c.val_auroc = std::stod(get("val_auroc"));
  c.config_hash = get("config_hash");
  c.weights_hash = get("weights_hash");
  c.path = path;
  if (config_hash(out.config) != c.config_hash) throw IntegrityError(path.string() + ": config hash mismatch");
  for (const auto& name : file.names()) {
    const auto t = file.read(name);
    if (t.shape.size() != 2) throw IntegrityError(path.string() + ": tensor " + name + " is not 2-D");
    c.params.emplace_back(name, Eigen::Map<const RowMajorMatrix>(t.data.data(), t.shape[0], t.shape[1]));
  }
  return out;
}

void restore(Model& model, const Checkpoint& ckpt) {
  if (!ckpt.weights_hash.empty() && ckpt.weights_hash != frozen_weights_hash(model)) {
    throw IntegrityError("checkpoint was trained on a different frozen backbone (weights hash mismatch)");
  }
  for (const auto& [name, m] : ckpt.params) {
    if (!model.tree().contains(name)) throw ConfigError("checkpoint tensor not in model: " + name);
    const auto& cur = model.value(name);
    if (cur.rows() != m.rows() || cur.cols() != m.cols()) throw ShapeError("checkpoint shape mismatch for " + name);
    model.set_value(name, m);
  }
}

const Checkpoint& select_best(const std::vector<Checkpoint>& checkpoints) {
  if (checkpoints.empty()) throw ConfigError("select_best needs at least one checkpoint");
  const Checkpoint* best = &checkpoints.front();
  for (const auto& c : checkpoints) {
    if (c.val_auroc > best->val_auroc || (c.val_auroc == best->val_auroc && c.epoch < best->epoch)) best = &c;
  }
  return *best;
}

}  // namespace dfd
