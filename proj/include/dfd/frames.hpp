#pragma once

#include <opencv2/core.hpp>

#include <filesystem>
#include <vector>

namespace dfd {

// Evenly spaced frame indices: floor(i * length / k) for i < k, or every
// frame once when the video is shorter than k. InputError for empty videos.
std::vector<int> sample_frames(int video_length, int k = 32);

struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  cv::Point2d center() const { return {(x0 + x1) / 2.0, (y0 + y1) / 2.0}; }
  bool operator==(const Box&) const = default;
};

// Scales the box about its center by `margin` (1.3 -> 30% larger per side length).
Box expand_box(const Box& box, double margin);
// Intersection with [0, width] x [0, height].
Box clamp_box(const Box& box, int width, int height);

// Crops `box` (rounded to whole pixels) out of `image`; pixels outside the
// image replicate the nearest edge, so the crop keeps the box's aspect.
cv::Mat crop_replicate(const cv::Mat& image, const Box& box);

// RGB <-> disk helpers (OpenCV stores BGR).
cv::Mat read_rgb(const std::filesystem::path& path);
void write_rgb_png(const std::filesystem::path& path, const cv::Mat& rgb);

// Frame access for a video file or a directory of frame images.
int count_frames(const std::filesystem::path& source);
// Returns frames at the given strictly increasing indices, RGB8.
std::vector<cv::Mat> read_frames(const std::filesystem::path& source, const std::vector<int>& indices);

}  // namespace dfd
