#include "dfd/synthetic.hpp"

#include "dfd/report.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dfd {

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

FrameDataset make_synthetic_dataset(const SyntheticSpec& spec, const std::string& tag) {
  FrameDataset ds;
  ds.tag = tag;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> base(60.0, 190.0);
  std::uniform_real_distribution<double> slope(-20.0, 20.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const int n = spec.side;
  const int lo = n / 4, hi = n - n / 4;  // central square
  for (int v = 0; v < 2 * spec.videos_per_class; ++v) {
    const int label = v % 2;
    const std::string id = tag + "/" + label_name(label) + "_" + std::to_string(v / 2);
    double color[3], gx[3], gy[3];
    for (int c = 0; c < 3; ++c) {
      color[c] = base(rng);
      gx[c] = slope(rng);
      gy[c] = slope(rng);
    }
    for (int f = 0; f < spec.frames_per_video; ++f) {
      cv::Mat img(n, n, CV_8UC3);
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          const bool face = y >= lo && y < hi && x >= lo && x < hi;
          auto& px = img.at<cv::Vec3b>(y, x);
          for (int c = 0; c < 3; ++c) {
            double val = color[c] + gx[c] * (x - n / 2.0) / n + gy[c] * (y - n / 2.0) / n;
            if (face && label == 1) val += (c == 2 ? 1.0 : c == 0 ? -0.5 : 0.0) * spec.artifact_strength;
            val += spec.noise * noise(rng);
            px[c] = static_cast<uchar>(std::clamp(std::lround(val), 0L, 255L));
          }
        }
      }
      ds.frames.push_back({id, f, label, {}, img});
    }
  }
  return ds;
}

SyntheticSplits make_synthetic_splits(const SyntheticSpec& spec) {
  SyntheticSpec train = spec;
  train.seed = mix(spec.seed, 1);
  SyntheticSpec val = spec;
  val.seed = mix(spec.seed, 2);
  val.videos_per_class = std::max(1, spec.videos_per_class / 4);
  return {make_synthetic_dataset(train, "train"), make_synthetic_dataset(val, "val")};
}

std::vector<FrameDataset> make_synthetic_test_sets(const SyntheticSpec& spec) {
  // (strength multiplier, noise multiplier) per set: increasingly hard shifts.
  const double shift[5][2] = {{0.8, 1.0}, {1.0, 1.0}, {0.5, 1.5}, {0.7, 1.25}, {0.4, 1.25}};
  std::vector<FrameDataset> out;
  for (std::size_t i = 0; i < kDatasetOrder.size(); ++i) {
    SyntheticSpec s = spec;
    s.seed = mix(spec.seed, 10 + i);
    s.videos_per_class = std::max(2, spec.videos_per_class / 4);
    s.frames_per_video = std::min(spec.frames_per_video, 8);
    s.artifact_strength = spec.artifact_strength * shift[i][0];
    s.noise = spec.noise * shift[i][1];
    out.push_back(make_synthetic_dataset(s, kDatasetOrder[i]));
  }
  return out;
}

}  // namespace dfd
