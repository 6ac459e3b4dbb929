#include "dfd/backbone.hpp"

#include "dfd/error.hpp"

#include <functional>
#include <numeric>

namespace dfd {

std::pair<int, int> EncoderSpec::patch_grid() const {
  return {input_side / patch_size, input_side / patch_size};
}

int EncoderSpec::token_count() const {
  const auto [gy, gx] = patch_grid();
  return gy * gx + 1;
}

void EncoderSpec::validate() const {
  if (feature_dim <= 0 || input_side <= 0 || patch_size <= 0 || num_layers <= 0 || num_heads <= 0 ||
      mlp_dim <= 0) {
    throw ConfigError("encoder spec '" + name + "': dimensions must be positive");
  }
  if (input_side % patch_size != 0) throw ConfigError("encoder spec '" + name + "': input not divisible by patch");
  if (feature_dim % num_heads != 0) throw ConfigError("encoder spec '" + name + "': width not divisible by heads");
}

EncoderSpec clip_vit_l14_spec() {
  EncoderSpec s;
  s.name = "clip-vit-l14";
  s.input_side = 224;
  s.patch_size = 14;
  s.feature_dim = 1024;
  s.num_layers = 24;
  s.num_heads = 16;
  s.mlp_dim = 4096;
  s.layer_norm_eps = 1e-5;
  s.pixel_mean = {0.48145466, 0.4578275, 0.40821073};
  s.pixel_std = {0.26862954, 0.26130258, 0.27577711};
  return s;
}

EncoderSpec toy_encoder_spec() {
  EncoderSpec s = clip_vit_l14_spec();
  s.name = "toy";
  s.input_side = 8;
  s.patch_size = 4;
  s.feature_dim = 8;
  s.num_layers = 2;
  s.num_heads = 2;
  s.mlp_dim = 32;
  return s;
}

EncoderSpec encoder_spec_by_name(const std::string& name) {
  if (name == "clip-vit-l14") return clip_vit_l14_spec();
  if (name == "toy") return toy_encoder_spec();
  throw ConfigError("unknown backbone '" + name + "' (expected clip-vit-l14 or toy)");
}

std::int64_t ParameterInfo::count() const {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

void NamedParameterTree::add(const std::string& name, std::vector<std::int64_t> shape, bool trainable) {
  if (name.empty()) throw ConfigError("parameter name must be nonempty");
  if (shape.empty()) throw ShapeError("parameter " + name + " has an empty shape");
  for (auto d : shape) {
    if (d <= 0) throw ShapeError("parameter " + name + " has a nonpositive dimension");
  }
  if (contains(name)) throw ConfigError("duplicate parameter name " + name);
  index_.emplace(name, order_.size());
  order_.push_back(name);
  infos_.push_back({std::move(shape), trainable});
}

const ParameterInfo& NamedParameterTree::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return infos_[it->second];
}

ParameterInfo& NamedParameterTree::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return infos_[it->second];
}

std::int64_t NamedParameterTree::total_count() const {
  std::int64_t n = 0;
  for (const auto& p : infos_) n += p.count();
  return n;
}

std::int64_t NamedParameterTree::trainable_count() const {
  std::int64_t n = 0;
  for (const auto& p : infos_) {
    if (p.trainable) n += p.count();
  }
  return n;
}

std::vector<std::string> NamedParameterTree::trainable_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < order_.size(); ++i) {
    if (infos_[i].trainable) out.push_back(order_[i]);
  }
  return out;
}

void NamedParameterTree::freeze_all() {
  for (auto& p : infos_) p.trainable = false;
}

bool NamedParameterTree::operator==(const NamedParameterTree& other) const {
  if (order_ != other.order_) return false;
  for (std::size_t i = 0; i < infos_.size(); ++i) {
    if (infos_[i].shape != other.infos_[i].shape || infos_[i].trainable != other.infos_[i].trainable) {
      return false;
    }
  }
  return true;
}

NamedParameterTree parameter_tree(const EncoderSpec& spec) {
  spec.validate();
  const std::int64_t d = spec.feature_dim;
  const std::int64_t p = spec.patch_size;
  const std::int64_t m = spec.mlp_dim;

  NamedParameterTree t;
  t.add("embeddings.patch_embedding.weight", {d, 3, p, p});
  t.add("embeddings.class_embedding", {d});
  t.add("embeddings.position_embedding.weight", {spec.token_count(), d});
  t.add("pre_layernorm.weight", {d});
  t.add("pre_layernorm.bias", {d});
  for (int l = 0; l < spec.num_layers; ++l) {
    const std::string pre = "encoder.layers." + std::to_string(l) + ".";
    t.add(pre + "layer_norm1.weight", {d});
    t.add(pre + "layer_norm1.bias", {d});
    for (const char* proj : {"q_proj", "k_proj", "v_proj", "out_proj"}) {
      t.add(pre + "self_attn." + proj + ".weight", {d, d});
      t.add(pre + "self_attn." + proj + ".bias", {d});
    }
    t.add(pre + "layer_norm2.weight", {d});
    t.add(pre + "layer_norm2.bias", {d});
    t.add(pre + "mlp.fc1.weight", {m, d});
    t.add(pre + "mlp.fc1.bias", {m});
    t.add(pre + "mlp.fc2.weight", {d, m});
    t.add(pre + "mlp.fc2.bias", {d});
  }
  t.add("post_layernorm.weight", {d});
  t.add("post_layernorm.bias", {d});
  t.add(kHeadWeight, {d, 2});
  t.add(kHeadBias, {2});
  return t;
}

std::pair<Eigen::Index, Eigen::Index> storage_dims(const std::vector<std::int64_t>& shape) {
  if (shape.empty()) throw ShapeError("empty shape");
  if (shape.size() == 1) return {1, shape[0]};
  std::int64_t rest = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) rest *= shape[i];
  return {shape[0], rest};
}

}  // namespace dfd
