#pragma once

#include "dfd/frames.hpp"

#include <opencv2/core.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dfd {

struct Detection {
  Box box;
  // Any of: 68-point iBUG layout, 5-point (eyes first), or just the two eye centers.
  std::vector<cv::Point2d> landmarks;
};

class FaceDetector {
 public:
  virtual ~FaceDetector() = default;
  // Largest face in an RGB8 frame, or nullopt when none is found.
  virtual std::optional<Detection> detect_largest_face(const cv::Mat& rgb) = 0;
};

// Returns whatever the callback says. Used by tests and synthetic runs.
class StubDetector : public FaceDetector {
 public:
  using Callback = std::function<std::optional<Detection>(const cv::Mat& rgb)>;

  explicit StubDetector(Callback cb) : cb_(std::move(cb)) {}

  static StubDetector fixed(std::optional<Detection> d);
  static StubDetector never();
  // Square box of `fraction` times the shorter side, centered in the frame.
  static StubDetector centered(double fraction);

  std::optional<Detection> detect_largest_face(const cv::Mat& rgb) override { return cb_(rgb); }

 private:
  Callback cb_;
};

// Runs `<command> <png path>` per frame and parses its stdout as JSON:
//   {"box": [x0, y0, x1, y1], "landmarks": [[x, y], ...]}  or  {"box": null}
// This is how an external landmark detector (dlib or similar) plugs in.
class CommandDetector : public FaceDetector {
 public:
  explicit CommandDetector(std::string command);
  std::optional<Detection> detect_largest_face(const cv::Mat& rgb) override;

 private:
  std::string command_;
};

// Left/right eye centers from the landmark layout, if recognizable.
std::optional<std::pair<cv::Point2d, cv::Point2d>> eye_centers(const Detection& d);

// Parses the CommandDetector JSON reply. InputError on malformed output.
std::optional<Detection> parse_detection_json(const std::string& text);

}  // namespace dfd
