#pragma once

#include "dfd/autograd.hpp"

#include <opencv2/core.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dfd {

// Architecture of a pre-norm vision transformer whose classification token is
// the image feature. Pixel statistics belong to the encoder: callers hand in
// RGB crops and the encoder resizes and normalizes them itself.
struct EncoderSpec {
  std::string name;
  int input_side = 0;
  int patch_size = 0;
  int feature_dim = 0;
  int num_layers = 0;
  int num_heads = 0;
  int mlp_dim = 0;
  double layer_norm_eps = 1e-5;
  std::array<double, 3> pixel_mean{};
  std::array<double, 3> pixel_std{};

  std::pair<int, int> patch_grid() const;
  int token_count() const;  // patches + classification token
  void validate() const;
};

// CLIP ViT-L/14 vision tower: 224px input, 16x16 patch grid, width 1024.
EncoderSpec clip_vit_l14_spec();
// Two-layer width-8 encoder on 8x8 inputs with a 2x2 patch grid.
EncoderSpec toy_encoder_spec();
// Resolves "clip-vit-l14" or "toy".
EncoderSpec encoder_spec_by_name(const std::string& name);

struct ParameterInfo {
  std::vector<std::int64_t> shape;
  bool trainable = false;
  std::int64_t count() const;
};

// Ordered name -> (shape, trainable) map over every learnable tensor.
class NamedParameterTree {
 public:
  void add(const std::string& name, std::vector<std::int64_t> shape, bool trainable = false);
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  const ParameterInfo& at(const std::string& name) const;
  ParameterInfo& at(const std::string& name);
  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }

  std::int64_t total_count() const;
  std::int64_t trainable_count() const;
  std::vector<std::string> trainable_names() const;
  void freeze_all();

  bool operator==(const NamedParameterTree& other) const;

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<ParameterInfo> infos_;
};

inline constexpr const char* kHeadWeight = "head.weight";
inline constexpr const char* kHeadBias = "head.bias";

// Parameter names and shapes derived from the architecture alone, including
// the two-class head (weight feature_dim x 2, bias 2). Everything is frozen.
NamedParameterTree parameter_tree(const EncoderSpec& spec);

// Matrix layout used to store a tensor of the given shape:
// [n] -> 1 x n, [r, c] -> r x c, [d0, d1, ...] -> d0 x (d1 * ...).
std::pair<Eigen::Index, Eigen::Index> storage_dims(const std::vector<std::int64_t>& shape);

// Channel-major float image, already resized and normalized for an encoder.
struct ImageTensor {
  int channels = 3;
  int height = 0;
  int width = 0;
  std::vector<double> data;  // CHW

  double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
};

// Encoder plus linear two-class head, with one graph leaf per parameter.
class Model {
 public:
  static Model random_init(const EncoderSpec& spec, std::uint64_t seed);
  // Loads encoder tensors from a safetensors checkpoint in the published
  // CLIP layout (``vision_model.*`` names); the head is freshly initialized.
  static Model from_pretrained(const EncoderSpec& spec, const std::filesystem::path& weights,
                               std::uint64_t seed);
  // Weights path from the argument, else $DFD_WEIGHTS; random init only for the toy spec.
  static Model create(const EncoderSpec& spec, const std::optional<std::filesystem::path>& weights,
                      std::uint64_t seed);

  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
  // Copies would alias parameter storage; use clone() for a deep copy.
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model clone() const;

  const EncoderSpec& spec() const { return spec_; }
  const NamedParameterTree& tree() const { return tree_; }

  // Adopts trainability flags from `tree` and materializes entries that are
  // new (LoRA factors): first factor small random, second factor zero.
  void sync_tree(const NamedParameterTree& tree, std::uint64_t seed);
  void set_lora_alpha(double alpha) { lora_alpha_ = alpha; }
  double lora_alpha() const { return lora_alpha_; }

  ag::Var param(const std::string& name) const;
  const Matrix& value(const std::string& name) const;
  void set_value(const std::string& name, const Matrix& v);

  // Resize (short side, bicubic), center-crop and normalize an RGB8 image.
  ImageTensor preprocess(const cv::Mat& rgb) const;

  // Classification token after the final norm layer, 1 x feature_dim.
  ag::Var forward(const ImageTensor& image) const;
  // Stacked features, B x feature_dim; builds a graph when parameters train.
  ag::Var forward_batch(std::span<const ImageTensor> images) const;
  // Inference-only features, B x feature_dim.
  Matrix encode(std::span<const ImageTensor> images) const;

  void zero_grad();
  // FNV-1a over the raw bytes of the named parameters, in tree order.
  std::uint64_t checksum(const std::vector<std::string>& names) const;
  std::vector<std::string> frozen_names() const;

 private:
  Model() = default;
  void allocate(std::uint64_t seed);
  ag::Var linear(const ag::Var& x, const std::string& prefix) const;
  ag::Var attention(const ag::Var& x, const std::string& prefix) const;
  ag::Var norm(const ag::Var& x, const std::string& prefix) const;

  EncoderSpec spec_;
  NamedParameterTree tree_;
  std::unordered_map<std::string, std::shared_ptr<ag::Node>> params_;
  double lora_alpha_ = 1.0;
};

// Splits a CHW image into row-major patches, one row per patch, columns
// ordered (channel, dy, dx) to match a [width, 3, p, p] patch-embedding kernel.
Matrix extract_patches(const ImageTensor& image, int patch_size);

}  // namespace dfd
