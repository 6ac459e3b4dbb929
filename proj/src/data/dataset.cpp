#include "dfd/dataset.hpp"

#include "dfd/error.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace dfd {

std::map<std::string, int> FrameDataset::video_labels() const {
  std::map<std::string, int> out;
  for (const auto& f : frames) {
    auto [it, inserted] = out.emplace(f.video_id, f.label);
    if (!inserted && it->second != f.label) throw InputError("video " + f.video_id + " has mixed labels");
  }
  return out;
}

cv::Mat load_frame(const FrameRef& f) {
  if (!f.image.empty()) return f.image;
  return read_rgb(f.path);
}

FrameDataset frames_from_manifests(const std::vector<VideoManifest>& manifests, const std::filesystem::path& root,
                                   const std::string& tag) {
  FrameDataset ds;
  ds.tag = tag;
  for (const auto& m : manifests) {
    for (const auto& fr : m.frames) {
      ds.frames.push_back({m.video_id, fr.frame_index, m.label, resolve_data_path(root, fr.image_path), {}});
    }
  }
  return ds;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                   std::size_t min_last) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch_size) {
    const std::size_t end = std::min(n, i + batch_size);
    if (end - i < min_last && !out.empty()) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace dfd
