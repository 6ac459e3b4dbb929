#include "dfd/error.hpp"
#include "dfd/metrics.hpp"
#include "generators.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace dfd;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("dfd_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("small worked examples") {
  CHECK(auroc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}) == 0.75);
  CHECK(auroc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}) == 1.0);
  CHECK(auroc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{0, 0, 1, 1}) == 0.0);
  CHECK(auroc(std::vector<double>{0.5, 0.5, 0.5}, std::vector<int>{0, 1, 1}) == 0.5);
  CHECK_THROWS_AS(auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), UndefinedMetricError);
  CHECK_THROWS_AS(auroc(std::vector<double>{}, std::vector<int>{}), UndefinedMetricError);
  CHECK_THROWS(auroc(std::vector<double>{0.1, NAN}, std::vector<int>{0, 1}));
  CHECK_THROWS(auroc(std::vector<double>{0.1}, std::vector<int>{0, 1}));
}

TEST_CASE("rank statistic equals pair counting exactly, ties included") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = gen::uniform_int(rng, 2, 80);
    const auto y = gen::labels(rng, n);
    const auto s = gen::tied_scores(rng, n, gen::uniform_int(rng, 1, 10));
    const auto c = auroc_counts(s, y);
    const auto o = oracle::pair_count(s, y);
    CHECK(c.twice_u == o.twice_u);
    CHECK(c.positives == o.positives);
    CHECK(c.negatives == o.negatives);
    CHECK(auroc(s, y) == auroc_from_counts(c));
  }
}

TEST_CASE("invariance under strictly increasing transforms") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = gen::uniform_int(rng, 2, 60);
    const auto y = gen::labels(rng, n);
    std::vector<double> s(n), cube(n), logit(n);
    for (int i = 0; i < n; ++i) {
      s[i] = gen::uniform(rng, 0.01, 0.99);
      cube[i] = s[i] * s[i] * s[i];
      logit[i] = 3.0 * std::log(s[i] / (1.0 - s[i])) + 2.0;
    }
    const double a = auroc(s, y);
    CHECK(std::abs(auroc(cube, y) - a) <= 1e-12);
    CHECK(std::abs(auroc(logit, y) - a) <= 1e-12);
  }
}

TEST_CASE("flipping labels complements the area") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = gen::uniform_int(rng, 2, 50);
    const auto y = gen::labels(rng, n);
    std::vector<int> flipped(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) flipped[i] = 1 - y[i];
    const auto s = gen::tied_scores(rng, n, 4);
    CHECK(auroc(s, y) + auroc(s, flipped) == 1.0);
  }
}

TEST_CASE("frame scores aggregate to the per-video mean") {
  PredictionSet p;
  p.records = {{"a", 0, 0.2}, {"a", 1, 0.4}, {"b", 0, 0.9}, {"c", 0, 0.1}, {"c", 2, 0.5}, {"c", 4, 0.6}};
  p.labels = {{"a", 0}, {"b", 1}, {"c", 1}};
  const auto v = aggregate_video_scores(p);
  CHECK(v.at("a") == doctest::Approx(0.3));
  CHECK(v.at("b") == 0.9);
  CHECK(v.at("c") == doctest::Approx(0.4));
  // Videos: a 0.3 (real), b 0.9 and c 0.4 (fake); both fakes outrank the real one.
  CHECK(video_auroc(p) == 1.0);

  // Frame-level ranking differs from the video-level one.
  std::vector<double> fs;
  std::vector<int> fy;
  for (const auto& r : p.records) {
    fs.push_back(r.fake_score);
    fy.push_back(p.labels.at(r.video_id));
  }
  CHECK(auroc(fs, fy) < 1.0);
}

TEST_CASE("aggregation rejects records without a label") {
  PredictionSet p;
  p.records = {{"a", 0, 0.2}, {"z", 0, 0.4}};
  p.labels = {{"a", 0}};
  CHECK_THROWS(p.validate());
  CHECK_THROWS(aggregate_video_scores(p));
}

TEST_CASE("predictions survive a JSONL round trip") {
  const auto dir = temp_dir("metrics");
  PredictionSet p;
  p.dataset_tag = "DFD";
  p.records = {{"x/1", 0, 0.125}, {"x/1", 7, 1.0 / 3.0}, {"y/2", 3, 0.75}};
  p.labels = {{"x/1", 1}, {"y/2", 0}};
  write_predictions(dir / "DFD.jsonl", p);
  const auto q = read_predictions(dir / "DFD.jsonl");
  CHECK(q.dataset_tag == "DFD");
  REQUIRE(q.records.size() == 3);
  CHECK(q.records[1].fake_score == p.records[1].fake_score);
  CHECK(q.records[1].frame_index == 7);
  CHECK(q.labels == p.labels);
  CHECK(video_auroc(q) == video_auroc(p));
  CHECK_THROWS_AS(read_predictions(dir / "missing.jsonl"), InputError);
  std::filesystem::remove_all(dir);
}
