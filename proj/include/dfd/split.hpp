#pragma once

#include "dfd/manifest.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dfd {

struct SplitSpec {
  // method_tag -> fraction of that tag's test videos moved into val.
  // The key "*" covers tags without their own entry.
  std::map<std::string, double> val_fraction_from_test;
  std::uint64_t seed = 0;

  double fraction_for(const std::string& tag) const;
  void validate() const;
};

void to_json(nlohmann::json& j, const SplitSpec& s);
void from_json(const nlohmann::json& j, SplitSpec& s);

struct Splits {
  std::vector<VideoManifest> train, val, test;
};

// Manifests keep their own split, except that for each method tag
// round(fraction * n_test) test videos, chosen by a seeded shuffle, move to val.
// IntegrityError when a video_id appears twice.
Splits build_split(const std::vector<VideoManifest>& manifests, const SplitSpec& spec);

}  // namespace dfd
