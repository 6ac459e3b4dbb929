#pragma once

#include "dfd/manifest.hpp"

#include <opencv2/core.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dfd {

// One training/evaluation frame. Either `image` holds the RGB8 pixels
// (synthetic data) or `path` points at the PNG crop on disk.
struct FrameRef {
  std::string video_id;
  int frame_index = 0;
  int label = 0;
  std::filesystem::path path;
  cv::Mat image;
};

struct FrameDataset {
  std::string tag;
  std::vector<FrameRef> frames;

  std::map<std::string, int> video_labels() const;
  std::size_t video_count() const { return video_labels().size(); }
};

cv::Mat load_frame(const FrameRef& f);

FrameDataset frames_from_manifests(const std::vector<VideoManifest>& manifests, const std::filesystem::path& root,
                                   const std::string& tag);

// Fixed-size batches of frame positions in a seeded shuffled order. The
// last partial batch is kept unless it would be smaller than `min_last`.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                   std::size_t min_last = 1);

}  // namespace dfd
