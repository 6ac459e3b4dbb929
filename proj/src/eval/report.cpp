#include "dfd/report.hpp"

#include "dfd/error.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace dfd {

namespace {

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

void EvalReport::validate() const {
  if (per_dataset.empty()) throw InputError("report for '" + setup_name + "' has no datasets");
  for (const auto& [tag, v] : per_dataset) {
    if (!(v >= 0.0 && v <= 100.0)) throw InputError("AUROC for " + tag + " is outside [0, 100]");
  }
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  j = {{"setup_name", r.setup_name}, {"checkpoint_id", r.checkpoint_id}, {"per_dataset", r.per_dataset}};
}

void from_json(const nlohmann::json& j, EvalReport& r) {
  r.setup_name = j.value("setup_name", "");
  r.checkpoint_id = j.value("checkpoint_id", "");
  r.per_dataset = j.at("per_dataset").get<std::map<std::string, double>>();
}

void to_json(nlohmann::json& j, const CurveSeries& s) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& [e, v] : s.points) pts.push_back({{"epoch", e}, {"val_auroc", v}});
  j = {{"label", s.label}, {"points", pts}};
}

void from_json(const nlohmann::json& j, CurveSeries& s) {
  s.label = j.at("label").get<std::string>();
  s.points.clear();
  for (const auto& p : j.at("points")) s.points.emplace_back(p.at("epoch").get<int>(), p.at("val_auroc").get<double>());
}

double to_percent(double auroc) {
  if (!(auroc >= 0.0 && auroc <= 1.0)) throw InputError("AUROC must be in [0, 1]");
  return std::round(auroc * 10000.0) / 100.0;
}

std::vector<std::string> dataset_columns(const std::vector<EvalReport>& reports) {
  std::set<std::string> present;
  for (const auto& r : reports)
    for (const auto& [tag, _] : r.per_dataset) present.insert(tag);
  std::vector<std::string> cols;
  for (const auto& t : kDatasetOrder) {
    if (present.erase(t)) cols.push_back(t);
  }
  cols.insert(cols.end(), present.begin(), present.end());
  return cols;
}

std::string format_table(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw InputError("no reports to format");
  for (const auto& r : reports) r.validate();
  const auto cols = dataset_columns(reports);

  std::vector<std::vector<std::string>> rows;
  rows.push_back({"Setup"});
  rows[0].insert(rows[0].end(), cols.begin(), cols.end());
  for (const auto& r : reports) {
    std::vector<std::string> row{r.setup_name.empty() ? r.checkpoint_id : setup_display_name(r.setup_name)};
    for (const auto& c : cols) {
      auto it = r.per_dataset.find(c);
      row.push_back(it == r.per_dataset.end() ? "-" : fmt2(it->second));
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(rows[0].size(), 0);
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());

  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i == 0) {
        os << row[i] << std::string(width[i] - row[i].size(), ' ');
      } else {
        os << "  " << std::string(width[i] - row[i].size(), ' ') << row[i];
      }
    }
    os << '\n';
  };
  emit(rows[0]);
  std::size_t total = width[0];
  for (std::size_t i = 1; i < width.size(); ++i) total += 2 + width[i];
  os << std::string(total, '-') << '\n';
  for (std::size_t i = 1; i < rows.size(); ++i) emit(rows[i]);
  return os.str();
}

std::string setup_display_name(const std::string& setup) {
  static const std::map<std::string, std::string> names{
      {"linear_probe", "Linear Probing"},
      {"ln", "LN-Tuning"},
      {"ln_norm", "LN-Tuning + Norm"},
      {"ln_norm_unal", "LN-Tuning + Norm + UnAl"},
      {"ln_norm_unal_slerp", "LN-Tuning + Norm + UnAl + Slerp"},
  };
  auto it = names.find(setup);
  return it == names.end() ? setup : it->second;
}

std::vector<std::filesystem::path> emit_report(const std::vector<EvalReport>& reports,
                                               const std::filesystem::path& stem) {
  const std::string table = format_table(reports);  // validates
  auto txt = stem;
  txt += ".txt";
  auto json = stem;
  json += ".json";
  nlohmann::json j = {{"columns", dataset_columns(reports)}, {"rows", reports}};
  write_text_atomic(json, j.dump(2) + "\n");
  write_text_atomic(txt, table);
  return {txt, json};
}

void render_curves_png(const std::vector<CurveSeries>& series, const std::filesystem::path& path, int width,
                       int height) {
  static const std::vector<cv::Scalar> palette{{31, 119, 180}, {255, 127, 14}, {44, 160, 44},
                                               {214, 39, 40},  {148, 103, 189}, {140, 86, 75}};
  const int left = 70, right = 310, top = 30, bottom = 50;
  cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));

  int max_epoch = 1;
  double lo = 1.0, hi = 0.0;
  for (const auto& s : series) {
    for (const auto& [e, v] : s.points) {
      max_epoch = std::max(max_epoch, e);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (lo > hi) lo = 0.0, hi = 1.0;
  lo = std::floor(lo * 20.0) / 20.0;
  hi = std::min(1.0, std::ceil(hi * 20.0) / 20.0);
  if (hi - lo < 0.05) lo = std::max(0.0, hi - 0.05);

  const int pw = width - left - right, ph = height - top - bottom;
  auto px = [&](double e) { return left + static_cast<int>(std::lround(e / max_epoch * pw)); };
  auto py = [&](double v) { return top + static_cast<int>(std::lround((hi - v) / (hi - lo) * ph)); };

  const cv::Scalar black(0, 0, 0), grid(220, 220, 220);
  for (int k = 0; k <= 5; ++k) {
    const double v = lo + (hi - lo) * k / 5.0;
    cv::line(img, {left, py(v)}, {left + pw, py(v)}, grid, 1);
    cv::putText(img, fmt2(v * 100.0), {5, py(v) + 5}, cv::FONT_HERSHEY_SIMPLEX, 0.4, black, 1, cv::LINE_AA);
  }
  const int ticks = std::min(max_epoch, 10);
  for (int k = 0; k <= ticks; ++k) {
    const int e = static_cast<int>(std::lround(static_cast<double>(max_epoch) * k / ticks));
    cv::putText(img, std::to_string(e), {px(e) - 5, top + ph + 18}, cv::FONT_HERSHEY_SIMPLEX, 0.4, black, 1,
                cv::LINE_AA);
  }
  cv::rectangle(img, {left, top}, {left + pw, top + ph}, black, 1);
  cv::putText(img, "epoch", {left + pw / 2 - 20, height - 10}, cv::FONT_HERSHEY_SIMPLEX, 0.5, black, 1, cv::LINE_AA);
  cv::putText(img, "val AUROC (%)", {5, top - 6 > 10 ? top - 6 : 12}, cv::FONT_HERSHEY_SIMPLEX, 0.4, black, 1, cv::LINE_AA);

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& c = palette[i % palette.size()];
    std::vector<cv::Point> pts;
    for (const auto& [e, v] : series[i].points) pts.emplace_back(px(e), py(v));
    if (pts.size() > 1) cv::polylines(img, pts, false, c, 2, cv::LINE_AA);
    for (const auto& p : pts) cv::circle(img, p, 3, c, cv::FILLED, cv::LINE_AA);
    const int lx = left + pw + 20;
    const int ly = top + 18 + 22 * static_cast<int>(i);
    cv::line(img, {lx, ly - 4}, {lx + 25, ly - 4}, c, 2);
    cv::putText(img, series[i].label, {lx + 32, ly}, cv::FONT_HERSHEY_SIMPLEX, 0.45, black, 1, cv::LINE_AA);
  }
  // Palette is RGB; OpenCV writes BGR.
  cv::Mat bgr;
  cv::cvtColor(img, bgr, cv::COLOR_RGB2BGR);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), bgr)) throw InputError("cannot write " + path.string());
}

std::vector<std::filesystem::path> emit_plot(const std::vector<CurveSeries>& series,
                                             const std::filesystem::path& stem) {
  if (series.empty()) throw InputError("no curves to plot");
  for (const auto& s : series) {
    if (s.points.empty()) throw InputError("curve '" + s.label + "' has no points");
  }
  auto json = stem;
  json += ".json";
  auto png = stem;
  png += ".png";
  write_text_atomic(json, nlohmann::json{{"series", series}}.dump(2) + "\n");
  render_curves_png(series, png);
  return {json, png};
}

}  // namespace dfd
