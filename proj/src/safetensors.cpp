#include "dfd/safetensors.hpp"

#include "dfd/error.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <limits>
#include <cstring>
#include <fstream>
#include <numeric>

namespace dfd::safetensors {

namespace {

static_assert(std::endian::native == std::endian::little, "safetensors I/O assumes little-endian");

std::size_t element_size(DType d) {
  switch (d) {
    case DType::F64: return 8;
    case DType::F32: return 4;
    case DType::F16:
    case DType::BF16: return 2;
  }
  return 0;
}

DType parse_dtype(const std::string& s) {
  if (s == "F64") return DType::F64;
  if (s == "F32") return DType::F32;
  if (s == "F16") return DType::F16;
  if (s == "BF16") return DType::BF16;
  throw InputError("safetensors: unsupported dtype " + s);
}

double half_to_double(std::uint16_t h) {
  const std::uint32_t sign = (h >> 15) & 1u;
  const std::uint32_t exp = (h >> 10) & 0x1Fu;
  const std::uint32_t frac = h & 0x3FFu;
  double v;
  if (exp == 0) {
    v = std::ldexp(static_cast<double>(frac), -24);
  } else if (exp == 31) {
    v = frac ? std::numeric_limits<double>::quiet_NaN() : std::numeric_limits<double>::infinity();
  } else {
    v = std::ldexp(static_cast<double>(frac | 0x400u), static_cast<int>(exp) - 25);
  }
  return sign ? -v : v;
}

std::int64_t element_count(const std::vector<std::int64_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

}  // namespace

std::string to_string(DType dtype) {
  switch (dtype) {
    case DType::F64: return "F64";
    case DType::F32: return "F32";
    case DType::F16: return "F16";
    case DType::BF16: return "BF16";
  }
  return "?";
}

File File::open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open weights file: " + path.string());
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || header_len == 0 || header_len > (1ull << 30)) {
    throw InputError("not a safetensors file: " + path.string());
  }
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw InputError("truncated safetensors header: " + path.string());

  File f;
  f.path_ = path;
  f.data_start_ = 8 + header_len;
  const auto j = nlohmann::json::parse(header);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "__metadata__") {
      for (auto m = it->begin(); m != it->end(); ++m) f.metadata_[m.key()] = m->get<std::string>();
      continue;
    }
    Entry e;
    e.dtype = parse_dtype(it->at("dtype").get<std::string>());
    e.shape = it->at("shape").get<std::vector<std::int64_t>>();
    const auto offsets = it->at("data_offsets").get<std::vector<std::uint64_t>>();
    if (offsets.size() != 2 || offsets[1] < offsets[0]) throw InputError("bad data_offsets for " + it.key());
    e.begin = offsets[0];
    e.end = offsets[1];
    const auto expected = static_cast<std::uint64_t>(element_count(e.shape)) * element_size(e.dtype);
    if (e.end - e.begin != expected) throw InputError("size mismatch for tensor " + it.key());
    f.entries_.emplace(it.key(), std::move(e));
  }
  return f;
}

std::vector<std::string> File::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [k, _] : entries_) out.push_back(k);
  return out;
}

const Entry& File::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("tensor not found in " + path_.string() + ": " + name);
  return it->second;
}

Tensor File::read(const std::string& name) const {
  const Entry& e = entry(name);
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw ConfigError("cannot open weights file: " + path_.string());
  in.seekg(static_cast<std::streamoff>(data_start_ + e.begin));
  std::vector<char> raw(e.end - e.begin);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!in) throw InputError("truncated tensor data for " + name);

  Tensor t;
  t.shape = e.shape;
  const auto n = static_cast<std::size_t>(element_count(e.shape));
  t.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (e.dtype) {
      case DType::F64: {
        double v;
        std::memcpy(&v, raw.data() + 8 * i, 8);
        t.data[i] = v;
        break;
      }
      case DType::F32: {
        float v;
        std::memcpy(&v, raw.data() + 4 * i, 4);
        t.data[i] = v;
        break;
      }
      case DType::F16: {
        std::uint16_t h;
        std::memcpy(&h, raw.data() + 2 * i, 2);
        t.data[i] = half_to_double(h);
        break;
      }
      case DType::BF16: {
        std::uint16_t h;
        std::memcpy(&h, raw.data() + 2 * i, 2);
        t.data[i] = std::bit_cast<float>(static_cast<std::uint32_t>(h) << 16);
        break;
      }
    }
  }
  return t;
}

void write(const std::filesystem::path& path, const std::vector<std::pair<std::string, Tensor>>& tensors,
           const std::map<std::string, std::string>& metadata, DType dtype) {
  if (dtype != DType::F64 && dtype != DType::F32) throw ConfigError("safetensors writer supports F64/F32 only");
  const std::size_t esize = element_size(dtype);
  nlohmann::json header = nlohmann::json::object();
  if (!metadata.empty()) header["__metadata__"] = metadata;
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    if (static_cast<std::size_t>(element_count(t.shape)) != t.data.size()) {
      throw ShapeError("tensor " + name + ": shape does not match data length");
    }
    const std::uint64_t bytes = t.data.size() * esize;
    header[name] = {{"dtype", to_string(dtype)}, {"shape", t.shape}, {"data_offsets", {offset, offset + bytes}}};
    offset += bytes;
  }
  std::string hs = header.dump();
  // Pad the header so the data buffer starts 8-byte aligned.
  while ((hs.size() % 8) != 0) hs.push_back(' ');
  const std::uint64_t hlen = hs.size();

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, t] : tensors) {
      for (double v : t.data) {
        if (dtype == DType::F64) {
          out.write(reinterpret_cast<const char*>(&v), 8);
        } else {
          const float f = static_cast<float>(v);
          out.write(reinterpret_cast<const char*>(&f), 4);
        }
      }
    }
    if (!out) throw InputError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace dfd::safetensors
