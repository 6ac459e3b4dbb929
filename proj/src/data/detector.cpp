#include "dfd/detector.hpp"

#include "dfd/error.hpp"

#include <json.hpp>

#include <array>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <unistd.h>

namespace dfd {

StubDetector StubDetector::fixed(std::optional<Detection> d) {
  return StubDetector([d](const cv::Mat&) { return d; });
}

StubDetector StubDetector::never() {
  return StubDetector([](const cv::Mat&) { return std::optional<Detection>{}; });
}

StubDetector StubDetector::centered(double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("centered detector fraction must be in (0, 1]");
  return StubDetector([fraction](const cv::Mat& img) -> std::optional<Detection> {
    const double side = fraction * std::min(img.cols, img.rows);
    const double cx = img.cols / 2.0, cy = img.rows / 2.0;
    return Detection{{cx - side / 2, cy - side / 2, cx + side / 2, cy + side / 2}, {}};
  });
}

std::optional<std::pair<cv::Point2d, cv::Point2d>> eye_centers(const Detection& d) {
  const auto& p = d.landmarks;
  auto mean = [&](int lo, int hi) {
    cv::Point2d m(0, 0);
    for (int i = lo; i < hi; ++i) m += p[i];
    return m * (1.0 / (hi - lo));
  };
  if (p.size() == 68) return std::make_pair(mean(36, 42), mean(42, 48));
  if (p.size() == 5 || p.size() == 2) return std::make_pair(p[0], p[1]);
  return std::nullopt;
}

std::optional<Detection> parse_detection_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("detector output is not JSON: ") + e.what());
  }
  if (!j.contains("box") || j["box"].is_null()) return std::nullopt;
  const auto b = j["box"].get<std::vector<double>>();
  if (b.size() != 4 || !(b[2] > b[0]) || !(b[3] > b[1])) throw InputError("detector box must be [x0, y0, x1, y1]");
  Detection d{{b[0], b[1], b[2], b[3]}, {}};
  if (j.contains("landmarks")) {
    for (const auto& pt : j["landmarks"]) {
      const auto xy = pt.get<std::vector<double>>();
      if (xy.size() != 2) throw InputError("landmark must be [x, y]");
      d.landmarks.emplace_back(xy[0], xy[1]);
    }
  }
  return d;
}

CommandDetector::CommandDetector(std::string command) : command_(std::move(command)) {
  if (command_.empty()) throw ConfigError("detector command is empty");
}

std::optional<Detection> CommandDetector::detect_largest_face(const cv::Mat& rgb) {
  static std::atomic<unsigned long> counter{0};
  const auto tmp = std::filesystem::temp_directory_path() /
                   ("dfd_det_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".png");
  write_rgb_png(tmp, rgb);
  const std::string cmd = command_ + " '" + tmp.string() + "'";
  std::string out;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) {
    std::filesystem::remove(tmp);
    throw ConfigError("cannot run detector command: " + command_);
  }
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  std::filesystem::remove(tmp);
  if (status != 0) throw InputError("detector command failed with status " + std::to_string(status));
  return parse_detection_json(out);
}

}  // namespace dfd
