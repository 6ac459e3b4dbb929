#pragma once

#include "dfd/detector.hpp"
#include "dfd/manifest.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dfd {

struct PreprocessOptions {
  int frames = 32;
  double margin = 1.3;
  int output_side = kFrameSide;
  std::filesystem::path output_root;  // data root; PNGs go to <root>/<video_id>/<index>.png
};

struct VideoJob {
  std::string video_id;
  std::filesystem::path source;
  int label = 0;
  std::string method_tag;
  Split split = Split::test;
};

struct PreprocessOutcome {
  std::optional<VideoManifest> manifest;  // empty when the video was excluded
  int frames_dropped = 0;
  std::string exclusion_reason;
};

struct PreprocessStats {
  std::size_t videos_seen = 0;
  std::size_t videos_kept = 0;
  std::size_t videos_excluded = 0;
  std::size_t frames_written = 0;
  std::size_t frames_dropped = 0;
  std::vector<std::pair<std::string, std::string>> exclusions;  // (video_id, reason)
};

// Rotates `frame` about the box center so the eye line is horizontal, then
// crops the margin-expanded box (edge-replicated where it leaves the frame)
// and resizes to side x side. `expanded` receives the expanded box.
cv::Mat align_and_crop(const cv::Mat& frame, const Detection& det, double margin, int side, Box* expanded = nullptr,
                       bool* aligned = nullptr);

// Rotation angle in degrees (OpenCV convention) that levels the eye line.
double eye_line_angle_deg(const cv::Point2d& left, const cv::Point2d& right);

PreprocessOutcome preprocess_video(const VideoJob& job, FaceDetector& detector, const PreprocessOptions& opts);

// Runs every job on a pool of `workers` threads (one video per task). Each
// worker gets its own detector from `make_detector`. Kept manifests are
// written, sorted by video_id, to `manifest_path` by a single writer.
using DetectorFactory = std::function<std::unique_ptr<FaceDetector>()>;
PreprocessStats preprocess_videos(const std::vector<VideoJob>& jobs, const DetectorFactory& make_detector,
                                  const PreprocessOptions& opts, int workers,
                                  const std::filesystem::path& manifest_path);

// Finds videos under <input>/<real|fake>/[<method_tag>/]<video file or frame dir>.
// Entries directly under real/ or fake/ get `default_tag`.
std::vector<VideoJob> discover_videos(const std::filesystem::path& input, Split split,
                                      const std::string& default_tag);

}  // namespace dfd
