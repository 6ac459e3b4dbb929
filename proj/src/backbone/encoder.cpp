#include "dfd/backbone.hpp"

#include "dfd/error.hpp"
#include "dfd/safetensors.hpp"

#include <opencv2/imgproc.hpp>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <random>

namespace dfd {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_norm_name(const std::string& name) {
  return name.find("layernorm") != std::string::npos || name.find("layer_norm") != std::string::npos;
}

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Matrix uniform(Eigen::Index r, Eigen::Index c, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = dist(rng);
  return m;
}

Matrix normal(Eigen::Index r, Eigen::Index c, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = dist(rng);
  return m;
}

Matrix init_value(const std::string& name, const ParameterInfo& info, const EncoderSpec& spec,
                  std::mt19937_64& rng) {
  const auto [r, c] = storage_dims(info.shape);
  if (is_norm_name(name)) {
    return ends_with(name, ".weight") ? Matrix::Ones(r, c) : Matrix::Zero(r, c);
  }
  if (name == "embeddings.class_embedding" || name == "embeddings.position_embedding.weight") {
    return normal(r, c, 1.0 / std::sqrt(static_cast<double>(spec.feature_dim)), rng);
  }
  if (ends_with(name, ".lora_B")) return Matrix::Zero(r, c);
  if (name == kHeadWeight || name == kHeadBias) {
    return uniform(r, c, 1.0 / std::sqrt(static_cast<double>(spec.feature_dim)), rng);
  }
  // Linear layers, patch kernel and LoRA first factors: fan-in uniform.
  double fan_in = static_cast<double>(c);
  if (info.shape.size() == 1) {
    // Bias of a linear layer; its fan-in is the matching weight's column count.
    fan_in = ends_with(name, "fc2.bias") ? spec.mlp_dim : spec.feature_dim;
  }
  return uniform(r, c, 1.0 / std::sqrt(fan_in), rng);
}

std::string published_name(const std::string& internal) {
  std::string n = internal;
  const std::string pre = "pre_layernorm";
  if (n.rfind(pre, 0) == 0) n.replace(0, pre.size(), "pre_layrnorm");
  return n;
}

}  // namespace

Model Model::random_init(const EncoderSpec& spec, std::uint64_t seed) {
  Model m;
  m.spec_ = spec;
  m.tree_ = parameter_tree(spec);
  m.allocate(seed);
  return m;
}

void Model::allocate(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const auto& name : tree_.names()) {
    const auto& info = tree_.at(name);
    auto node = std::make_shared<ag::Node>();
    node->value = init_value(name, info, spec_, rng);
    node->requires_grad = info.trainable;
    params_[name] = std::move(node);
  }
}

Model Model::from_pretrained(const EncoderSpec& spec, const std::filesystem::path& weights,
                             std::uint64_t seed) {
  if (!std::filesystem::exists(weights)) throw ConfigError("weights file not found: " + weights.string());
  const auto file = safetensors::File::open(weights);
  Model m;
  m.spec_ = spec;
  m.tree_ = parameter_tree(spec);
  std::mt19937_64 rng(seed);
  for (const auto& name : m.tree_.names()) {
    const auto& info = m.tree_.at(name);
    auto node = std::make_shared<ag::Node>();
    if (name == kHeadWeight || name == kHeadBias) {
      node->value = init_value(name, info, spec, rng);
    } else {
      const std::string pub = published_name(name);
      std::string found;
      for (const auto& cand : {"vision_model." + pub, pub, name}) {
        if (file.contains(cand)) {
          found = cand;
          break;
        }
      }
      if (found.empty()) throw ConfigError("weights file lacks tensor for " + name);
      auto t = file.read(found);
      if (t.shape != info.shape) throw ShapeError("weights tensor " + found + " has unexpected shape");
      const auto [r, c] = storage_dims(info.shape);
      node->value = Eigen::Map<const RowMajorMatrix>(t.data.data(), r, c);
    }
    m.params_[name] = std::move(node);
  }
  return m;
}

Model Model::create(const EncoderSpec& spec, const std::optional<std::filesystem::path>& weights,
                    std::uint64_t seed) {
  std::optional<std::filesystem::path> path = weights;
  if (!path || path->empty()) {
    if (const char* env = std::getenv("DFD_WEIGHTS"); env && *env) path = env;
  }
  if (path && !path->empty()) return from_pretrained(spec, *path, seed);
  if (spec.name == "toy") return random_init(spec, seed);
  throw ConfigError("backbone '" + spec.name + "' needs a weights file (config backbone.weights or $DFD_WEIGHTS)");
}

Model Model::clone() const {
  Model m;
  m.spec_ = spec_;
  m.tree_ = tree_;
  m.lora_alpha_ = lora_alpha_;
  for (const auto& [name, node] : params_) {
    auto copy = std::make_shared<ag::Node>();
    copy->value = node->value;
    copy->requires_grad = node->requires_grad;
    m.params_.emplace(name, std::move(copy));
  }
  return m;
}

void Model::sync_tree(const NamedParameterTree& tree, std::uint64_t seed) {
  for (const auto& name : tree_.names()) {
    if (!tree.contains(name)) throw ConfigError("adapter tree drops parameter " + name);
  }
  for (const auto& name : tree.names()) {
    const auto& info = tree.at(name);
    auto it = params_.find(name);
    if (it == params_.end()) {
      std::mt19937_64 rng(seed ^ name_hash(name));
      auto node = std::make_shared<ag::Node>();
      node->value = init_value(name, info, spec_, rng);
      it = params_.emplace(name, std::move(node)).first;
    } else if (!tree_.contains(name) || tree_.at(name).shape != info.shape) {
      throw ShapeError("adapter tree changes shape of " + name);
    }
    it->second->requires_grad = info.trainable;
  }
  tree_ = tree;
}

ag::Var Model::param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter " + name);
  return ag::Var(it->second);
}

const Matrix& Model::value(const std::string& name) const { return param(name).node()->value; }

void Model::set_value(const std::string& name, const Matrix& v) {
  auto node = param(name).node();
  if (node->value.rows() != v.rows() || node->value.cols() != v.cols()) {
    throw ShapeError("set_value: shape mismatch for " + name);
  }
  node->value = v;
}

ImageTensor Model::preprocess(const cv::Mat& rgb) const {
  if (rgb.empty() || rgb.type() != CV_8UC3) throw InputError("preprocess expects a nonempty 8-bit RGB image");
  const int side = spec_.input_side;
  cv::Mat img = rgb;
  const int short_side = std::min(img.rows, img.cols);
  if (short_side != side) {
    const double s = static_cast<double>(side) / short_side;
    const int w = std::max(side, static_cast<int>(std::lround(img.cols * s)));
    const int h = std::max(side, static_cast<int>(std::lround(img.rows * s)));
    const int interp = s < 1.0 ? cv::INTER_AREA : cv::INTER_CUBIC;
    cv::resize(rgb, img, cv::Size(w, h), 0, 0, interp);
  }
  const int y0 = (img.rows - side) / 2;
  const int x0 = (img.cols - side) / 2;
  ImageTensor t;
  t.channels = 3;
  t.height = side;
  t.width = side;
  t.data.resize(static_cast<std::size_t>(3) * side * side);
  for (int y = 0; y < side; ++y) {
    const auto* row = img.ptr<cv::Vec3b>(y0 + y);
    for (int x = 0; x < side; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = row[x0 + x][c] / 255.0;
        t.data[(static_cast<std::size_t>(c) * side + y) * side + x] = (v - spec_.pixel_mean[c]) / spec_.pixel_std[c];
      }
    }
  }
  return t;
}

Matrix extract_patches(const ImageTensor& image, int p) {
  const int gy = image.height / p;
  const int gx = image.width / p;
  Matrix out(gy * gx, image.channels * p * p);
  for (int py = 0; py < gy; ++py) {
    for (int px = 0; px < gx; ++px) {
      const Eigen::Index r = py * gx + px;
      Eigen::Index col = 0;
      for (int c = 0; c < image.channels; ++c)
        for (int dy = 0; dy < p; ++dy)
          for (int dx = 0; dx < p; ++dx) out(r, col++) = image.at(c, py * p + dy, px * p + dx);
    }
  }
  return out;
}

ag::Var Model::linear(const ag::Var& x, const std::string& prefix) const {
  ag::Var y = ag::add_row(ag::matmul_nt(x, param(prefix + ".weight")), param(prefix + ".bias"));
  const std::string a_name = prefix + ".lora_A";
  if (tree_.contains(a_name)) {
    const ag::Var a = param(a_name);
    const ag::Var b = param(prefix + ".lora_B");
    const double s = lora_alpha_ / static_cast<double>(a.rows());
    y = ag::add(y, ag::scale(ag::matmul_nt(ag::matmul_nt(x, a), b), s));
  }
  return y;
}

ag::Var Model::norm(const ag::Var& x, const std::string& prefix) const {
  return ag::layer_norm_rows(x, param(prefix + ".weight"), param(prefix + ".bias"), spec_.layer_norm_eps);
}

ag::Var Model::attention(const ag::Var& x, const std::string& prefix) const {
  const int heads = spec_.num_heads;
  const int dh = spec_.feature_dim / heads;
  const ag::Var q = ag::scale(linear(x, prefix + "q_proj"), 1.0 / std::sqrt(static_cast<double>(dh)));
  const ag::Var k = linear(x, prefix + "k_proj");
  const ag::Var v = linear(x, prefix + "v_proj");
  std::vector<ag::Var> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    const ag::Var qh = ag::slice_cols(q, h * dh, dh);
    const ag::Var kh = ag::slice_cols(k, h * dh, dh);
    const ag::Var vh = ag::slice_cols(v, h * dh, dh);
    outs.push_back(ag::matmul(ag::softmax_rows(ag::matmul_nt(qh, kh)), vh));
  }
  return linear(ag::concat_cols(outs), prefix + "out_proj");
}

ag::Var Model::forward(const ImageTensor& image) const {
  if (image.channels != 3 || image.height != spec_.input_side || image.width != spec_.input_side ||
      image.data.size() != static_cast<std::size_t>(3) * image.height * image.width) {
    throw InputError("encoder '" + spec_.name + "' expects 3x" + std::to_string(spec_.input_side) + "x" +
                     std::to_string(spec_.input_side) + " input, got " + std::to_string(image.channels) + "x" +
                     std::to_string(image.height) + "x" + std::to_string(image.width));
  }
  ag::Var x = ag::matmul_nt(ag::constant(extract_patches(image, spec_.patch_size)),
                            param("embeddings.patch_embedding.weight"));
  const std::array<ag::Var, 2> parts{param("embeddings.class_embedding"), x};
  x = ag::add(ag::concat_rows(parts), param("embeddings.position_embedding.weight"));
  x = norm(x, "pre_layernorm");
  for (int l = 0; l < spec_.num_layers; ++l) {
    const std::string pre = "encoder.layers." + std::to_string(l) + ".";
    x = ag::add(x, attention(norm(x, pre + "layer_norm1"), pre + "self_attn."));
    ag::Var h = ag::quick_gelu(linear(norm(x, pre + "layer_norm2"), pre + "mlp.fc1"));
    x = ag::add(x, linear(h, pre + "mlp.fc2"));
  }
  return norm(ag::row(x, 0), "post_layernorm");
}

ag::Var Model::forward_batch(std::span<const ImageTensor> images) const {
  if (images.empty()) return ag::constant(Matrix(0, spec_.feature_dim));
  std::vector<ag::Var> rows;
  rows.reserve(images.size());
  for (const auto& img : images) rows.push_back(forward(img));
  return ag::concat_rows(rows);
}

Matrix Model::encode(std::span<const ImageTensor> images) const {
  Matrix out(static_cast<Eigen::Index>(images.size()), spec_.feature_dim);
  for (std::size_t i = 0; i < images.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = forward(images[i]).value();
  return out;
}

void Model::zero_grad() {
  for (auto& [_, node] : params_) node->zero_grad();
}

std::uint64_t Model::checksum(const std::vector<std::string>& names) const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& name : names) {
    const Matrix& v = value(name);
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
    const std::size_t n = static_cast<std::size_t>(v.size()) * sizeof(double);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::vector<std::string> Model::frozen_names() const {
  std::vector<std::string> out;
  for (const auto& name : tree_.names()) {
    if (!tree_.at(name).trainable) out.push_back(name);
  }
  return out;
}

}  // namespace dfd
