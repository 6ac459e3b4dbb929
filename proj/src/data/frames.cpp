#include "dfd/frames.hpp"

#include "dfd/error.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace dfd {

namespace {

bool is_image_file(const std::filesystem::path& p) {
  static const std::set<std::string> exts{".png", ".jpg", ".jpeg", ".bmp"};
  auto e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return exts.count(e) > 0;
}

std::vector<std::filesystem::path> frame_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

std::vector<int> sample_frames(int video_length, int k) {
  if (video_length <= 0) throw InputError("cannot sample frames from an empty video");
  if (k <= 0) throw ConfigError("frame count k must be positive");
  std::vector<int> out;
  if (video_length < k) {
    out.resize(video_length);
    for (int i = 0; i < video_length; ++i) out[i] = i;
    return out;
  }
  out.reserve(k);
  for (int i = 0; i < k; ++i) {
    out.push_back(static_cast<int>(static_cast<long long>(i) * video_length / k));
  }
  return out;
}

Box expand_box(const Box& box, double margin) {
  if (!(margin > 0.0)) throw ConfigError("box margin must be positive");
  const auto c = box.center();
  const double hw = box.width() * margin / 2.0;
  const double hh = box.height() * margin / 2.0;
  return {c.x - hw, c.y - hh, c.x + hw, c.y + hh};
}

Box clamp_box(const Box& box, int width, int height) {
  return {std::clamp(box.x0, 0.0, static_cast<double>(width)), std::clamp(box.y0, 0.0, static_cast<double>(height)),
          std::clamp(box.x1, 0.0, static_cast<double>(width)), std::clamp(box.y1, 0.0, static_cast<double>(height))};
}

cv::Mat crop_replicate(const cv::Mat& image, const Box& box) {
  const int x0 = static_cast<int>(std::lround(box.x0));
  const int y0 = static_cast<int>(std::lround(box.y0));
  const int x1 = static_cast<int>(std::lround(box.x1));
  const int y1 = static_cast<int>(std::lround(box.y1));
  if (x1 <= x0 || y1 <= y0) throw InputError("crop box is empty");
  const int cx0 = std::clamp(x0, 0, image.cols - 1);
  const int cy0 = std::clamp(y0, 0, image.rows - 1);
  const int cx1 = std::clamp(x1, cx0 + 1, image.cols);
  const int cy1 = std::clamp(y1, cy0 + 1, image.rows);
  cv::Mat inner = image(cv::Rect(cx0, cy0, cx1 - cx0, cy1 - cy0));
  cv::Mat out;
  // Padding may exceed the clamped region when the box lies far outside;
  // BORDER_REPLICATE handles any pad size.
  cv::copyMakeBorder(inner, out, std::max(0, cy0 - y0), std::max(0, y1 - cy1), std::max(0, cx0 - x0),
                     std::max(0, x1 - cx1), cv::BORDER_REPLICATE);
  // When the box is entirely outside, the clamped rect still holds one pixel;
  // trim to the requested size.
  return out(cv::Rect(0, 0, x1 - x0, y1 - y0)).clone();
}

cv::Mat read_rgb(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw InputError("cannot decode image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

void write_rgb_png(const std::filesystem::path& path, const cv::Mat& rgb) {
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), bgr)) throw InputError("cannot write " + path.string());
}

int count_frames(const std::filesystem::path& source) {
  if (std::filesystem::is_directory(source)) return static_cast<int>(frame_files(source).size());
  cv::VideoCapture cap(source.string());
  if (!cap.isOpened()) throw InputError("cannot open video " + source.string());
  // Container frame counts are unreliable; decode-count instead.
  int n = 0;
  while (cap.grab()) ++n;
  return n;
}

std::vector<cv::Mat> read_frames(const std::filesystem::path& source, const std::vector<int>& indices) {
  std::vector<cv::Mat> out;
  out.reserve(indices.size());
  if (std::filesystem::is_directory(source)) {
    const auto files = frame_files(source);
    for (int i : indices) {
      if (i < 0 || i >= static_cast<int>(files.size())) throw InputError("frame index out of range");
      out.push_back(read_rgb(files[i]));
    }
    return out;
  }
  cv::VideoCapture cap(source.string());
  if (!cap.isOpened()) throw InputError("cannot open video " + source.string());
  int current = 0;
  cv::Mat bgr;
  for (int want : indices) {
    while (current < want) {
      if (!cap.grab()) throw InputError("video ended before frame " + std::to_string(want));
      ++current;
    }
    if (!cap.read(bgr) || bgr.empty()) throw InputError("cannot decode frame " + std::to_string(want));
    ++current;
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    out.push_back(std::move(rgb));
  }
  return out;
}

}  // namespace dfd
