#include "dfd/split.hpp"

#include "dfd/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace dfd {

double SplitSpec::fraction_for(const std::string& tag) const {
  if (auto it = val_fraction_from_test.find(tag); it != val_fraction_from_test.end()) return it->second;
  if (auto it = val_fraction_from_test.find("*"); it != val_fraction_from_test.end()) return it->second;
  return 0.0;
}

void SplitSpec::validate() const {
  for (const auto& [tag, f] : val_fraction_from_test) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("val fraction for '" + tag + "' must be in [0, 1]");
  }
}

void to_json(nlohmann::json& j, const SplitSpec& s) {
  j = {{"val_fraction_from_test", s.val_fraction_from_test}, {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SplitSpec& s) {
  s.val_fraction_from_test = j.value("val_fraction_from_test", std::map<std::string, double>{});
  s.seed = j.value("seed", std::uint64_t{0});
}

Splits build_split(const std::vector<VideoManifest>& manifests, const SplitSpec& spec) {
  spec.validate();
  std::set<std::string> ids;
  for (const auto& m : manifests) {
    if (!ids.insert(m.video_id).second) throw IntegrityError("video_id appears more than once: " + m.video_id);
  }

  Splits out;
  std::map<std::string, std::vector<const VideoManifest*>> test_by_tag;
  for (const auto& m : manifests) {
    switch (m.split) {
      case Split::train: out.train.push_back(m); break;
      case Split::val: out.val.push_back(m); break;
      case Split::test: test_by_tag[m.method_tag].push_back(&m); break;
    }
  }

  std::mt19937_64 rng(spec.seed);
  for (auto& [tag, group] : test_by_tag) {
    // Sort first so the result does not depend on input order.
    std::sort(group.begin(), group.end(), [](auto* a, auto* b) { return a->video_id < b->video_id; });
    std::shuffle(group.begin(), group.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::llround(spec.fraction_for(tag) * group.size()));
    for (std::size_t i = 0; i < group.size(); ++i) {
      VideoManifest m = *group[i];
      if (i < n_val) {
        m.split = Split::val;
        out.val.push_back(std::move(m));
      } else {
        out.test.push_back(std::move(m));
      }
    }
  }
  auto by_id = [](const auto& a, const auto& b) { return a.video_id < b.video_id; };
  std::sort(out.train.begin(), out.train.end(), by_id);
  std::sort(out.val.begin(), out.val.end(), by_id);
  std::sort(out.test.begin(), out.test.end(), by_id);
  return out;
}

}  // namespace dfd
