#include "dfd/backbone.hpp"
#include "dfd/error.hpp"
#include "dfd/safetensors.hpp"
#include "generators.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace dfd;

namespace {

std::vector<ImageTensor> random_images(const Model& m, std::mt19937_64& rng, int n) {
  std::vector<ImageTensor> out;
  for (int i = 0; i < n; ++i) out.push_back(m.preprocess(gen::rgb_image(rng, 12, 10)));
  return out;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("dfd_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("large encoder parameter count follows the architecture") {
  const auto spec = clip_vit_l14_spec();
  CHECK(spec.input_side == 224);
  CHECK(spec.patch_grid() == std::make_pair(16, 16));
  CHECK(spec.token_count() == 257);
  const auto tree = parameter_tree(spec);
  CHECK(tree.total_count() == oracle::vit_params(1024, 24, 4096, 14, 16, true));
  CHECK(tree.total_count() == 303181826);
  CHECK(tree.at(kHeadWeight).shape == std::vector<std::int64_t>{1024, 2});
  CHECK(tree.at(kHeadBias).shape == std::vector<std::int64_t>{2});
  CHECK(tree.trainable_count() == 0);
}

TEST_CASE("toy encoder parameter count follows the architecture") {
  const auto spec = toy_encoder_spec();
  CHECK(spec.patch_grid() == std::make_pair(2, 2));
  CHECK(spec.feature_dim == 8);
  CHECK(spec.num_layers == 2);
  const auto tree = parameter_tree(spec);
  CHECK(tree.total_count() ==
        oracle::vit_params(8, 2, spec.mlp_dim, spec.patch_size, 2, true));
  CHECK(tree.total_count() == 2226);

  std::int64_t norms = 0;
  for (const auto& n : tree.names())
    if (n.find("layernorm") != std::string::npos || n.find("layer_norm") != std::string::npos)
      norms += tree.at(n).count();
  CHECK(norms == oracle::norm_params(8, 2));
  CHECK(norms == 96);
}

TEST_CASE("spec lookup and validation") {
  CHECK(encoder_spec_by_name("toy").name == toy_encoder_spec().name);
  CHECK(encoder_spec_by_name("clip-vit-l14").feature_dim == 1024);
  CHECK_THROWS_AS(encoder_spec_by_name("resnet"), ConfigError);
  auto bad = toy_encoder_spec();
  bad.num_heads = 3;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("storage layout of tensors") {
  CHECK(storage_dims({5}) == std::make_pair<Eigen::Index, Eigen::Index>(1, 5));
  CHECK(storage_dims({3, 4}) == std::make_pair<Eigen::Index, Eigen::Index>(3, 4));
  CHECK(storage_dims({8, 3, 4, 4}) == std::make_pair<Eigen::Index, Eigen::Index>(8, 48));
}

TEST_CASE("named tree rejects duplicates and unknown names") {
  NamedParameterTree t;
  t.add("a", {2, 2});
  CHECK_THROWS(t.add("a", {1}));
  CHECK_THROWS(t.at("b"));
}

TEST_CASE("preprocess resizes, crops and normalizes") {
  const auto m = Model::random_init(toy_encoder_spec(), 1);
  cv::Mat img(20, 30, CV_8UC3, cv::Scalar(255, 0, 128));
  const auto t = m.preprocess(img);
  CHECK(t.height == 8);
  CHECK(t.width == 8);
  CHECK(t.data.size() == 3u * 8 * 8);
  const auto& s = m.spec();
  CHECK(t.at(0, 3, 3) == doctest::Approx((1.0 - s.pixel_mean[0]) / s.pixel_std[0]));
  CHECK(t.at(1, 0, 7) == doctest::Approx((0.0 - s.pixel_mean[1]) / s.pixel_std[1]));
  CHECK_THROWS_AS(m.preprocess(cv::Mat()), InputError);
  CHECK_THROWS_AS(m.preprocess(cv::Mat(8, 8, CV_8UC1)), InputError);
}

TEST_CASE("patch extraction orders columns by channel then row then column") {
  ImageTensor t;
  t.height = t.width = 4;
  t.data.resize(48);
  for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = static_cast<double>(i);
  const Matrix p = extract_patches(t, 2);
  REQUIRE(p.rows() == 4);
  REQUIRE(p.cols() == 12);
  // Patch (0,1): channel 0 pixels (0,2),(0,3),(1,2),(1,3), then channel 1.
  CHECK(p(1, 0) == t.at(0, 0, 2));
  CHECK(p(1, 3) == t.at(0, 1, 3));
  CHECK(p(1, 4) == t.at(1, 0, 2));
  CHECK(p(2, 0) == t.at(0, 2, 0));
}

TEST_CASE("forward is deterministic, finite and batch-consistent") {
  const auto a = Model::random_init(toy_encoder_spec(), 7);
  const auto b = Model::random_init(toy_encoder_spec(), 7);
  std::mt19937_64 rng(3);
  const auto imgs = random_images(a, rng, 5);
  const Matrix fa = a.encode(imgs), fb = b.encode(imgs);
  CHECK(fa.rows() == 5);
  CHECK(fa.cols() == 8);
  CHECK(fa.allFinite());
  CHECK(fa == fb);
  CHECK(a.checksum(a.tree().names()) == b.checksum(b.tree().names()));
  for (int i = 0; i < 5; ++i) CHECK(oracle::relative_error(a.forward(imgs[i]).value(), fa.row(i)) < 1e-12);

  const auto c = Model::random_init(toy_encoder_spec(), 8);
  CHECK(c.encode(imgs) != fa);
}

TEST_CASE("batch permutation permutes the features") {
  const auto m = Model::random_init(toy_encoder_spec(), 2);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    auto imgs = random_images(m, rng, 6);
    const Matrix f = m.encode(imgs);
    std::vector<int> perm{0, 1, 2, 3, 4, 5};
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<ImageTensor> shuffled;
    for (int i : perm) shuffled.push_back(imgs[i]);
    const Matrix g = m.encode(shuffled);
    for (int i = 0; i < 6; ++i) CHECK(oracle::relative_error(g.row(i), f.row(perm[i])) < 1e-12);
  }
}

TEST_CASE("empty batch yields zero rows") {
  const auto m = Model::random_init(toy_encoder_spec(), 2);
  const Matrix f = m.encode(std::span<const ImageTensor>{});
  CHECK(f.rows() == 0);
  CHECK(f.cols() == 8);
}

TEST_CASE("clone is deep") {
  auto m = Model::random_init(toy_encoder_spec(), 2);
  auto c = m.clone();
  const std::string name = "post_layernorm.bias";
  Matrix v = m.value(name);
  v.array() += 1.0;
  c.set_value(name, v);
  CHECK(c.value(name) == v);
  CHECK(m.value(name) != v);
  CHECK_THROWS(m.set_value(name, Matrix::Zero(3, 3)));
}

TEST_CASE("pretrained loading accepts published names and checks shapes") {
  const auto spec = toy_encoder_spec();
  const auto ref = Model::random_init(spec, 11);
  const auto dir = temp_dir("backbone");

  std::vector<std::pair<std::string, safetensors::Tensor>> tensors;
  for (const auto& name : ref.tree().names()) {
    if (name == kHeadWeight || name == kHeadBias) continue;
    const Matrix& v = ref.value(name);
    safetensors::Tensor t;
    t.shape = ref.tree().at(name).shape;
    for (int i = 0; i < v.rows(); ++i)
      for (int j = 0; j < v.cols(); ++j) t.data.push_back(v(i, j));
    // Published checkpoints spell the first norm "pre_layrnorm".
    std::string pub = name;
    if (pub.rfind("pre_layernorm", 0) == 0) pub.replace(0, 13, "pre_layrnorm");
    tensors.emplace_back("vision_model." + pub, std::move(t));
  }
  safetensors::write(dir / "w.safetensors", tensors);
  const auto loaded = Model::from_pretrained(spec, dir / "w.safetensors", 11);
  std::mt19937_64 rng(5);
  const auto imgs = random_images(ref, rng, 3);
  CHECK(loaded.encode(imgs) == ref.encode(imgs));

  auto truncated = tensors;
  truncated.pop_back();
  safetensors::write(dir / "short.safetensors", truncated);
  CHECK_THROWS_AS(Model::from_pretrained(spec, dir / "short.safetensors", 0), ConfigError);

  auto reshaped = tensors;
  reshaped[0].second.shape = {static_cast<std::int64_t>(reshaped[0].second.data.size())};
  safetensors::write(dir / "bad.safetensors", reshaped);
  CHECK_THROWS_AS(Model::from_pretrained(spec, dir / "bad.safetensors", 0), ShapeError);

  CHECK_THROWS_AS(Model::from_pretrained(spec, dir / "missing.safetensors", 0), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("large encoder without weights is a configuration error") {
  if (std::getenv("DFD_WEIGHTS")) return;
  CHECK_THROWS_AS(Model::create(clip_vit_l14_spec(), std::nullopt, 0), ConfigError);
}

TEST_CASE("safetensors round trip") {
  const auto dir = temp_dir("safetensors");
  safetensors::Tensor t{{2, 3}, {1.0, -2.5, 0.0, 3.25, 1e-3, 7.0}};
  for (auto dt : {safetensors::DType::F64, safetensors::DType::F32}) {
    safetensors::write(dir / "t.safetensors", {{"x", t}}, {{"k", "v"}}, dt);
    const auto f = safetensors::File::open(dir / "t.safetensors");
    CHECK(f.metadata().at("k") == "v");
    CHECK(f.entry("x").dtype == dt);
    const auto r = f.read("x");
    CHECK(r.shape == t.shape);
    for (std::size_t i = 0; i < t.data.size(); ++i) CHECK(r.data[i] == doctest::Approx(t.data[i]).epsilon(1e-7));
  }
  CHECK_THROWS(safetensors::write(dir / "h.safetensors", {{"x", t}}, {}, safetensors::DType::BF16));
  std::filesystem::remove_all(dir);
}

TEST_CASE("safetensors reads half-precision tensors") {
  const auto dir = temp_dir("safetensors_half");
  // 1.0, -2.0, 0.5 in bf16 and f16.
  const std::string header = R"({"a":{"dtype":"BF16","shape":[3],"data_offsets":[0,6]},)"
                             R"("b":{"dtype":"F16","shape":[3],"data_offsets":[6,12]}})";
  const unsigned char payload[] = {0x80, 0x3F, 0x00, 0xC0, 0x00, 0x3F, 0x00, 0x3C, 0x00, 0xC0, 0x00, 0x38};
  {
    std::ofstream out(dir / "h.safetensors", std::ios::binary);
    const std::uint64_t n = header.size();
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((n >> (8 * i)) & 0xFF));
    out << header;
    out.write(reinterpret_cast<const char*>(payload), sizeof(payload));
  }
  const auto f = safetensors::File::open(dir / "h.safetensors");
  CHECK(f.read("a").data == std::vector<double>{1.0, -2.0, 0.5});
  CHECK(f.read("b").data == std::vector<double>{1.0, -2.0, 0.5});
  std::filesystem::remove_all(dir);
}

TEST_CASE("safetensors rejects corrupt files") {
  const auto dir = temp_dir("safetensors_bad");
  std::ofstream(dir / "bad.safetensors", std::ios::binary) << "xx";
  CHECK_THROWS(safetensors::File::open(dir / "bad.safetensors"));
  std::filesystem::remove_all(dir);
}
