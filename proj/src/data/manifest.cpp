#include "dfd/manifest.hpp"

#include "dfd/error.hpp"

#include <cstdlib>
#include <fstream>

namespace dfd {

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw InputError("unknown split: " + s);
}

std::string label_name(int label) {
  if (label == 0) return "real";
  if (label == 1) return "fake";
  throw InputError("label must be 0 or 1");
}

int label_from_string(const std::string& s) {
  if (s == "real" || s == "0") return 0;
  if (s == "fake" || s == "1") return 1;
  throw InputError("unknown label: " + s);
}

void VideoManifest::validate() const {
  if (video_id.empty()) throw InputError("manifest has an empty video_id");
  if (label != 0 && label != 1) throw InputError(video_id + ": label must be 0 or 1");
  if (frames.size() > static_cast<std::size_t>(kMaxFramesPerVideo)) {
    throw InputError(video_id + ": more than 32 frames");
  }
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].frame_index <= frames[i - 1].frame_index) {
      throw InputError(video_id + ": frame indices must be strictly increasing");
    }
  }
}

void to_json(nlohmann::json& j, const FrameRecord& f) {
  j = {{"frame_index", f.frame_index},
       {"image_path", f.image_path},
       {"face_box", {f.face_box.x0, f.face_box.y0, f.face_box.x1, f.face_box.y1}},
       {"landmarks_found", f.landmarks_found}};
}

void from_json(const nlohmann::json& j, FrameRecord& f) {
  f.frame_index = j.at("frame_index").get<int>();
  f.image_path = j.at("image_path").get<std::string>();
  const auto b = j.at("face_box").get<std::vector<double>>();
  if (b.size() != 4) throw InputError("face_box must have 4 numbers");
  f.face_box = {b[0], b[1], b[2], b[3]};
  f.landmarks_found = j.value("landmarks_found", false);
}

void to_json(nlohmann::json& j, const VideoManifest& m) {
  j = {{"video_id", m.video_id},   {"source_path", m.source_path}, {"label", label_name(m.label)},
       {"method_tag", m.method_tag}, {"split", to_string(m.split)}, {"frames", m.frames}};
}

void from_json(const nlohmann::json& j, VideoManifest& m) {
  m.video_id = j.at("video_id").get<std::string>();
  m.source_path = j.value("source_path", "");
  const auto& l = j.at("label");
  m.label = l.is_number() ? l.get<int>() : label_from_string(l.get<std::string>());
  m.method_tag = j.value("method_tag", "");
  m.split = split_from_string(j.value("split", "test"));
  m.frames = j.value("frames", std::vector<FrameRecord>{});
}

void write_manifests(const std::filesystem::path& path, const std::vector<VideoManifest>& manifests) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    for (const auto& m : manifests) {
      m.validate();
      out << nlohmann::json(m).dump() << '\n';
    }
    if (!out) throw InputError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<VideoManifest> read_manifests(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest " + path.string());
  std::vector<VideoManifest> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto m = nlohmann::json::parse(line).get<VideoManifest>();
      m.validate();
      out.push_back(std::move(m));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::filesystem::path resolve_data_path(const std::filesystem::path& root, const std::string& p) {
  std::filesystem::path q(p);
  return q.is_absolute() ? q : root / q;
}

std::filesystem::path data_root_or(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("DFD_DATA_ROOT"); env && *env) return env;
  return fallback;
}

}  // namespace dfd
