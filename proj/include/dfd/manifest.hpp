#pragma once

#include "dfd/frames.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace dfd {

enum class Split { train, val, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

// 0 = real, 1 = fake.
std::string label_name(int label);
int label_from_string(const std::string& s);

constexpr int kMaxFramesPerVideo = 32;
constexpr int kFrameSide = 256;

struct FrameRecord {
  int frame_index = 0;
  std::string image_path;  // relative to the data root
  Box face_box;            // after margin expansion, before clamping
  bool landmarks_found = false;

  bool operator==(const FrameRecord&) const = default;
};

struct VideoManifest {
  std::string video_id;
  std::string source_path;
  int label = 0;
  std::string method_tag;
  Split split = Split::test;
  std::vector<FrameRecord> frames;

  // InputError when a structural invariant is broken.
  void validate() const;
  bool operator==(const VideoManifest&) const = default;
};

void to_json(nlohmann::json& j, const FrameRecord& f);
void from_json(const nlohmann::json& j, FrameRecord& f);
void to_json(nlohmann::json& j, const VideoManifest& m);
void from_json(const nlohmann::json& j, VideoManifest& m);

// One JSON object per line. Written atomically (temp file + rename).
void write_manifests(const std::filesystem::path& path, const std::vector<VideoManifest>& manifests);
std::vector<VideoManifest> read_manifests(const std::filesystem::path& path);

// Image paths in manifests are relative to a data root; absolute paths pass through.
std::filesystem::path resolve_data_path(const std::filesystem::path& root, const std::string& p);

// $DFD_DATA_ROOT if set, else `fallback`.
std::filesystem::path data_root_or(const std::filesystem::path& fallback);

}  // namespace dfd
