#include "dfd/metrics.hpp"

#include "dfd/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

namespace dfd {

void PredictionSet::validate() const {
  for (const auto& r : records) {
    if (!labels.count(r.video_id)) throw InputError("prediction for unlabeled video " + r.video_id);
    if (!std::isfinite(r.fake_score) || r.fake_score < 0.0 || r.fake_score > 1.0) {
      throw InputError("fake_score out of [0, 1] for " + r.video_id);
    }
  }
  for (const auto& [id, l] : labels) {
    if (l != 0 && l != 1) throw InputError("label for " + id + " must be 0 or 1");
  }
}

std::map<std::string, double> aggregate_video_scores(const PredictionSet& preds) {
  preds.validate();
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : preds.records) {
    auto& [sum, n] = acc[r.video_id];
    sum += r.fake_score;
    ++n;
  }
  std::map<std::string, double> out;
  for (const auto& [id, sn] : acc) out[id] = sn.first / static_cast<double>(sn.second);
  for (const auto& [id, _] : preds.labels) {
    if (!acc.count(id)) std::cerr << "[warn] video " << id << " has no frame predictions; excluded\n";
  }
  return out;
}

AurocCounts auroc_counts(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auroc: scores and labels differ in length");
  AurocCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InputError("auroc: labels must be 0 or 1");
    if (std::isnan(scores[i])) throw InputError("auroc: NaN score");
    (labels[i] == 1 ? c.positives : c.negatives)++;
  }
  if (c.positives == 0 || c.negatives == 0) {
    throw UndefinedMetricError("auroc is undefined unless both classes are present");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Tied block occupying 1-based ranks i+1..j has average rank (i+1+j)/2;
  // doubling keeps everything in integers.
  std::int64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const auto twice_avg = static_cast<std::int64_t>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) twice_rank_sum += twice_avg;
    }
    i = j;
  }
  c.twice_u = twice_rank_sum - c.positives * (c.positives + 1);
  return c;
}

double auroc_from_counts(const AurocCounts& c) {
  const std::int64_t denom = 2 * c.positives * c.negatives;
  if (denom <= 0) throw UndefinedMetricError("auroc is undefined unless both classes are present");
  // Divide the smaller side and subtract from one for the other, so that
  // A(y) + A(1 - y) rounds to exactly 1.
  if (2 * c.twice_u <= denom) return static_cast<double>(c.twice_u) / static_cast<double>(denom);
  return 1.0 - static_cast<double>(denom - c.twice_u) / static_cast<double>(denom);
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  return auroc_from_counts(auroc_counts(scores, labels));
}

double video_auroc(const PredictionSet& preds) {
  const auto per_video = aggregate_video_scores(preds);
  std::vector<double> s;
  std::vector<int> l;
  for (const auto& [id, score] : per_video) {
    s.push_back(score);
    l.push_back(preds.labels.at(id));
  }
  return auroc(s, l);
}

void write_predictions(const std::filesystem::path& path, const PredictionSet& preds) {
  preds.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    for (const auto& r : preds.records) {
      nlohmann::json j = {{"video_id", r.video_id},
                          {"frame_index", r.frame_index},
                          {"fake_score", r.fake_score},
                          {"label", preds.labels.at(r.video_id)}};
      out << j.dump() << '\n';
    }
  }
  std::filesystem::rename(tmp, path);
}

PredictionSet read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open predictions " + path.string());
  PredictionSet p;
  p.dataset_tag = path.stem().string();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PredictionRecord r{j.at("video_id").get<std::string>(), j.at("frame_index").get<int>(),
                         j.at("fake_score").get<double>()};
      const int label = j.at("label").get<int>();
      auto [it, inserted] = p.labels.emplace(r.video_id, label);
      if (!inserted && it->second != label) throw InputError("inconsistent label for " + r.video_id);
      p.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  p.validate();
  return p;
}

}  // namespace dfd
