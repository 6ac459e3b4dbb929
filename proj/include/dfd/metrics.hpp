#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace dfd {

struct PredictionRecord {
  std::string video_id;
  int frame_index = 0;
  double fake_score = 0.0;
};

struct PredictionSet {
  std::vector<PredictionRecord> records;
  std::map<std::string, int> labels;  // video_id -> 0 real / 1 fake
  std::string dataset_tag;

  // InputError if a record has no label or a score outside [0, 1].
  void validate() const;
};

// Mean frame score per video. Labeled videos without records are skipped
// with a warning on stderr.
std::map<std::string, double> aggregate_video_scores(const PredictionSet& preds);

// Mann-Whitney statistic in exact integer form: twice_u = sum over
// (fake, real) pairs of 2 if the fake scores higher, 1 on a tie.
struct AurocCounts {
  std::int64_t twice_u = 0;
  std::int64_t positives = 0;
  std::int64_t negatives = 0;
};

AurocCounts auroc_counts(std::span<const double> scores, std::span<const int> labels);
// twice_u / (2 * positives * negatives), rounded so that complementary
// counts sum to exactly 1.
double auroc_from_counts(const AurocCounts& c);
// Binary AUROC (fake = positive class). For two classes the one-vs-rest
// macro average reduces to this value. UndefinedMetricError if a class is missing.
double auroc(std::span<const double> scores, std::span<const int> labels);

// aggregate_video_scores followed by auroc over labeled videos.
double video_auroc(const PredictionSet& preds);

// Prediction dump: one JSON object per line with
// {video_id, frame_index, fake_score, label}; dataset tag = file stem.
void write_predictions(const std::filesystem::path& path, const PredictionSet& preds);
PredictionSet read_predictions(const std::filesystem::path& path);

}  // namespace dfd
