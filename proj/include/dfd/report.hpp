#pragma once

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace dfd {

// Canonical column order; other datasets follow alphabetically.
inline const std::vector<std::string> kDatasetOrder{"CDFv2", "DFD", "DFDC", "FFIW", "DSv1"};

struct EvalReport {
  std::map<std::string, double> per_dataset;  // dataset tag -> AUROC in percent, 2 decimals
  std::string setup_name;
  std::string checkpoint_id;

  void validate() const;
};

void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

// AUROC in [0, 1] -> percent rounded to 2 decimals.
double to_percent(double auroc);

std::vector<std::string> dataset_columns(const std::vector<EvalReport>& reports);

// Aligned text table, one row per report. Missing cells show "-".
std::string format_table(const std::vector<EvalReport>& reports);

struct CurveSeries {
  std::string label;
  std::vector<std::pair<int, double>> points;  // (epoch, validation AUROC in [0, 1])
};

void to_json(nlohmann::json& j, const CurveSeries& s);
void from_json(const nlohmann::json& j, CurveSeries& s);

// Human-readable legend name for a setup preset ("ln_norm" -> "LN-Tuning + Norm").
std::string setup_display_name(const std::string& setup);

// Table: <stem>.txt and <stem>.json. Plot: <stem>.json and <stem>.png.
// Both return the written paths and throw on empty input.
std::vector<std::filesystem::path> emit_report(const std::vector<EvalReport>& reports,
                                               const std::filesystem::path& stem);
std::vector<std::filesystem::path> emit_plot(const std::vector<CurveSeries>& series,
                                             const std::filesystem::path& stem);

// Renders the curves into an RGB8 image.
void render_curves_png(const std::vector<CurveSeries>& series, const std::filesystem::path& path, int width = 1000,
                       int height = 500);

}  // namespace dfd
