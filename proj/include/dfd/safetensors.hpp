#pragma once

// Reader/writer for the safetensors container: an 8-byte little-endian header
// length, a JSON header mapping names to {dtype, shape, data_offsets}, then a
// flat little-endian byte buffer. Published CLIP vision checkpoints ship in
// this format; checkpoints written by the trainer reuse it.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace dfd::safetensors {

enum class DType { F64, F32, F16, BF16 };

struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<double> data;  // row-major
};

struct Entry {
  DType dtype;
  std::vector<std::int64_t> shape;
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
};

class File {
 public:
  static File open(const std::filesystem::path& path);

  std::vector<std::string> names() const;
  bool contains(const std::string& name) const { return entries_.count(name) > 0; }
  const Entry& entry(const std::string& name) const;
  Tensor read(const std::string& name) const;
  const std::map<std::string, std::string>& metadata() const { return metadata_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::uint64_t data_start_ = 0;
  std::map<std::string, Entry> entries_;
  std::map<std::string, std::string> metadata_;
};

// Writes through a temporary file and renames it into place.
void write(const std::filesystem::path& path,
           const std::vector<std::pair<std::string, Tensor>>& tensors,
           const std::map<std::string, std::string>& metadata = {}, DType dtype = DType::F64);

std::string to_string(DType dtype);

}  // namespace dfd::safetensors
