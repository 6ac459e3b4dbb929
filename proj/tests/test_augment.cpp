#include "dfd/augment.hpp"
#include "dfd/error.hpp"
#include "generators.hpp"

#include <doctest.h>

using namespace dfd;

namespace {

double max_diff(const cv::Mat& a, const cv::Mat& b) { return cv::norm(a, b, cv::NORM_INF); }

cv::Mat smooth_image(int side) {
  cv::Mat m(side, side, CV_8UC3);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      m.at<cv::Vec3b>(y, x) = cv::Vec3b(static_cast<uchar>(x * 255 / side), static_cast<uchar>(y * 255 / side), 128);
  return m;
}

}  // namespace

TEST_CASE("evaluation mode is the identity and leaves the generator alone") {
  std::mt19937_64 rng(1), untouched(1);
  const cv::Mat img = gen::rgb_image(rng, 32, 32);
  std::mt19937_64 a(5);
  const cv::Mat out = augment_image(img, a, AugmentParams{}, false);
  CHECK(max_diff(out, img) == 0.0);
  CHECK(out.data != img.data);
  std::mt19937_64 b(5);
  CHECK(a() == b());
}

TEST_CASE("training augmentation is deterministic per seed and preserves shape") {
  std::mt19937_64 rng(2);
  const cv::Mat img = gen::rgb_image(rng, 40, 40);
  int changed = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 a(seed), b(seed);
    const cv::Mat x = augment_image(img, a, AugmentParams{});
    const cv::Mat y = augment_image(img, b, AugmentParams{});
    CHECK(max_diff(x, y) == 0.0);
    CHECK(x.size() == img.size());
    CHECK(x.type() == CV_8UC3);
    changed += max_diff(x, img) > 0.0;
  }
  CHECK(changed >= 18);
}

TEST_CASE("all probabilities zero is the identity") {
  AugmentParams p;
  p.flip_p = p.affine_p = p.blur_p = p.jitter_p = p.jpeg_p = 0.0;
  std::mt19937_64 rng(3);
  const cv::Mat img = gen::rgb_image(rng, 16, 16);
  CHECK(max_diff(augment_image(img, rng, p), img) == 0.0);
}

TEST_CASE("flip is an involution that mirrors columns") {
  std::mt19937_64 rng(4);
  const cv::Mat img = gen::rgb_image(rng, 9, 13);
  const cv::Mat f = horizontal_flip(img);
  CHECK(f.at<cv::Vec3b>(2, 0) == img.at<cv::Vec3b>(2, 12));
  CHECK(max_diff(horizontal_flip(f), img) == 0.0);
}

TEST_CASE("identity parameters leave the image unchanged") {
  std::mt19937_64 rng(5);
  const cv::Mat img = gen::rgb_image(rng, 24, 24);
  CHECK(max_diff(affine_transform(img, 0.0, 0.0, 0.0, 1.0), img) == 0.0);
  CHECK(max_diff(color_jitter(img, 1.0, 1.0, 1.0), img) <= 1.0);
  CHECK_THROWS_AS(gaussian_blur(img, 0.0), ConfigError);
}

TEST_CASE("blur smooths and jitter factors scale intensity") {
  std::mt19937_64 rng(6);
  const cv::Mat img = gen::rgb_image(rng, 32, 32);
  cv::Scalar m0, s0, m1, s1;
  cv::meanStdDev(img, m0, s0);
  cv::meanStdDev(gaussian_blur(img, 1.5), m1, s1);
  CHECK(s1[0] < s0[0]);
  const cv::Mat gray(8, 8, CV_8UC3, cv::Scalar(100, 100, 100));
  CHECK(cv::mean(color_jitter(gray, 1.2, 1.0, 1.0))[0] == doctest::Approx(120).epsilon(0.02));
  // Zero saturation collapses to gray.
  const cv::Mat desat = color_jitter(img, 1.0, 1.0, 0.0);
  std::vector<cv::Mat> ch;
  cv::split(desat, ch);
  CHECK(cv::norm(ch[0], ch[1], cv::NORM_INF) <= 1.0);
  CHECK(cv::norm(ch[1], ch[2], cv::NORM_INF) <= 1.0);
}

TEST_CASE("jpeg round trip is lossy but close on smooth content") {
  const cv::Mat img = smooth_image(64);
  const cv::Mat lo = jpeg_roundtrip(img, 60), hi = jpeg_roundtrip(img, 95);
  CHECK(lo.size() == img.size());
  CHECK(cv::norm(hi, img, cv::NORM_L2) <= cv::norm(lo, img, cv::NORM_L2));
  CHECK(cv::norm(hi, img, cv::NORM_L1) / img.total() / 3 < 3.0);
  CHECK_THROWS_AS(jpeg_roundtrip(img, 0), ConfigError);
}

TEST_CASE("parameter validation and JSON defaults") {
  AugmentParams p;
  CHECK_NOTHROW(p.validate());
  p.flip_p = 1.5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.jpeg_quality_min = 99;
  CHECK_THROWS_AS(p.validate(), ConfigError);

  nlohmann::json j = AugmentParams{};
  CHECK(j.at("blur_p") == 0.3);
  const auto partial = nlohmann::json{{"flip_p", 0.0}}.get<AugmentParams>();
  CHECK(partial.flip_p == 0.0);
  CHECK(partial.jpeg_quality_max == 95);

  std::mt19937_64 rng(1);
  CHECK_THROWS(augment_image(cv::Mat(4, 4, CV_8UC1), rng, AugmentParams{}));
}
