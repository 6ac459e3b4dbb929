#include "dfd/preprocess.hpp"

#include "dfd/error.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <mutex>
#include <numbers>
#include <set>
#include <thread>

namespace dfd {

double eye_line_angle_deg(const cv::Point2d& left, const cv::Point2d& right) {
  return std::atan2(right.y - left.y, right.x - left.x) * 180.0 / std::numbers::pi;
}

cv::Mat align_and_crop(const cv::Mat& frame, const Detection& det, double margin, int side, Box* expanded,
                       bool* aligned) {
  if (frame.empty()) throw InputError("align_and_crop: empty frame");
  if (side <= 0) throw ConfigError("output side must be positive");
  const Box box = expand_box(det.box, margin);
  if (expanded) *expanded = box;

  cv::Mat work = frame;
  const auto eyes = eye_centers(det);
  if (aligned) *aligned = eyes.has_value();
  if (eyes) {
    const double angle = eye_line_angle_deg(eyes->first, eyes->second);
    if (std::abs(angle) > 1e-9) {
      const cv::Mat rot = cv::getRotationMatrix2D(det.box.center(), angle, 1.0);
      cv::warpAffine(frame, work, rot, frame.size(), cv::INTER_LINEAR, cv::BORDER_REPLICATE);
    }
  }

  cv::Mat crop = crop_replicate(work, box);
  cv::Mat out;
  const int interp = (crop.cols > side || crop.rows > side) ? cv::INTER_AREA : cv::INTER_CUBIC;
  cv::resize(crop, out, cv::Size(side, side), 0, 0, interp);
  return out;
}

PreprocessOutcome preprocess_video(const VideoJob& job, FaceDetector& detector, const PreprocessOptions& opts) {
  if (opts.frames <= 0 || opts.frames > kMaxFramesPerVideo) throw ConfigError("frames must be in 1..32");
  PreprocessOutcome outcome;
  const int length = count_frames(job.source);
  if (length == 0) {
    outcome.exclusion_reason = "video has no decodable frames";
    return outcome;
  }
  const auto indices = sample_frames(length, opts.frames);
  const auto frames = read_frames(job.source, indices);

  VideoManifest m;
  m.video_id = job.video_id;
  m.source_path = job.source.string();
  m.label = job.label;
  m.method_tag = job.method_tag;
  m.split = job.split;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto det = detector.detect_largest_face(frames[i]);
    if (!det) {
      ++outcome.frames_dropped;
      continue;
    }
    FrameRecord rec;
    rec.frame_index = indices[i];
    cv::Mat face = align_and_crop(frames[i], *det, opts.margin, opts.output_side, &rec.face_box, &rec.landmarks_found);
    const std::filesystem::path rel = std::filesystem::path(job.video_id) / (std::to_string(indices[i]) + ".png");
    write_rgb_png(opts.output_root / rel, face);
    rec.image_path = rel.generic_string();
    m.frames.push_back(std::move(rec));
  }
  if (m.frames.empty()) {
    outcome.exclusion_reason = "no face detected in any sampled frame";
    return outcome;
  }
  outcome.manifest = std::move(m);
  return outcome;
}

PreprocessStats preprocess_videos(const std::vector<VideoJob>& jobs, const DetectorFactory& make_detector,
                                  const PreprocessOptions& opts, int workers,
                                  const std::filesystem::path& manifest_path) {
  if (workers < 1) throw ConfigError("workers must be >= 1");
  std::set<std::string> ids;
  for (const auto& j : jobs) {
    if (!ids.insert(j.video_id).second) throw IntegrityError("duplicate video_id " + j.video_id);
  }

  std::vector<PreprocessOutcome> outcomes(jobs.size());
  std::vector<std::string> failures(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mu;
  auto work = [&] {
    auto detector = make_detector();
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        outcomes[i] = preprocess_video(jobs[i], *detector, opts);
      } catch (const InputError& e) {
        outcomes[i].exclusion_reason = e.what();
      }
      if (!outcomes[i].manifest) {
        std::lock_guard lock(log_mu);
        std::cerr << "[preprocess] excluded " << jobs[i].video_id << ": " << outcomes[i].exclusion_reason << "\n";
      }
    }
  };
  const int n = std::min<int>(workers, std::max<std::size_t>(jobs.size(), 1));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  PreprocessStats stats;
  std::vector<VideoManifest> kept;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    ++stats.videos_seen;
    stats.frames_dropped += outcomes[i].frames_dropped;
    if (outcomes[i].manifest) {
      ++stats.videos_kept;
      stats.frames_written += outcomes[i].manifest->frames.size();
      kept.push_back(std::move(*outcomes[i].manifest));
    } else {
      ++stats.videos_excluded;
      stats.exclusions.emplace_back(jobs[i].video_id, outcomes[i].exclusion_reason);
    }
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.video_id < b.video_id; });
  write_manifests(manifest_path, kept);
  return stats;
}

namespace {

bool is_video_file(const std::filesystem::path& p) {
  static const std::set<std::string> exts{".mp4", ".avi", ".mov", ".mkv", ".webm", ".m4v"};
  auto e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return exts.count(e) > 0;
}

bool is_frame_dir(const std::filesystem::path& p) {
  if (!std::filesystem::is_directory(p)) return false;
  for (const auto& e : std::filesystem::directory_iterator(p)) {
    if (e.is_directory()) return false;
  }
  return count_frames(p) > 0;
}

std::vector<std::filesystem::path> sorted_children(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<VideoJob> discover_videos(const std::filesystem::path& input, Split split,
                                      const std::string& default_tag) {
  if (!std::filesystem::is_directory(input)) throw InputError("input is not a directory: " + input.string());
  std::vector<VideoJob> jobs;
  for (const std::string label : {"real", "fake"}) {
    const auto root = input / label;
    if (!std::filesystem::is_directory(root)) continue;
    auto add = [&](const std::filesystem::path& src, const std::string& tag) {
      jobs.push_back({label + "/" + tag + "/" + src.stem().string(), src, label_from_string(label), tag, split});
    };
    for (const auto& child : sorted_children(root)) {
      if (is_video_file(child) || is_frame_dir(child)) {
        add(child, default_tag);
      } else if (std::filesystem::is_directory(child)) {
        for (const auto& v : sorted_children(child)) {
          if (is_video_file(v) || is_frame_dir(v)) add(v, child.filename().string());
        }
      }
    }
  }
  if (jobs.empty()) throw InputError("no videos found under " + input.string() + " (expected real/ and fake/)");
  return jobs;
}

}  // namespace dfd
