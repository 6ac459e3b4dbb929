#pragma once

#include "dfd/config.hpp"
#include "dfd/dataset.hpp"

#include <string>
#include <vector>

namespace dfd {

// Small RGB frames grouped into videos. Every video has its own smooth
// background color; fake videos additionally carry a blue shift of
// `artifact_strength` over the central "face" square. Frames add Gaussian noise.
FrameDataset make_synthetic_dataset(const SyntheticSpec& spec, const std::string& tag);

struct SyntheticSplits {
  FrameDataset train;
  FrameDataset val;
};

// Train and validation sets from independent seeds (val uses a quarter of the videos).
SyntheticSplits make_synthetic_splits(const SyntheticSpec& spec);

// Five held-out synthetic sets named after the cross-dataset benchmarks,
// each with its own artifact strength and noise level.
std::vector<FrameDataset> make_synthetic_test_sets(const SyntheticSpec& spec);

}  // namespace dfd
