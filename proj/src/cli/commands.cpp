#include "dfd/cli.hpp"

#include "dfd/checkpoint.hpp"
#include "dfd/config.hpp"
#include "dfd/error.hpp"
#include "dfd/metrics.hpp"
#include "dfd/preprocess.hpp"
#include "dfd/report.hpp"
#include "dfd/split.hpp"
#include "dfd/synthetic.hpp"
#include "dfd/trainer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

namespace dfd::cli {

namespace {

namespace fs = std::filesystem;

struct Datasets {
  FrameDataset train;
  FrameDataset val;
  std::vector<FrameDataset> tests;
};

fs::path manifest_root(const TrainConfig& cfg, const fs::path& manifest) {
  if (!cfg.data.root.empty()) return cfg.data.root;
  return data_root_or(manifest.parent_path());
}

Datasets load_datasets(const TrainConfig& cfg) {
  Datasets d;
  if (cfg.data.source == "synthetic") {
    auto s = make_synthetic_splits(cfg.data.synthetic);
    d.train = std::move(s.train);
    d.val = std::move(s.val);
    d.tests = make_synthetic_test_sets(cfg.data.synthetic);
    return d;
  }
  if (cfg.data.manifest.empty()) throw ConfigError("data.manifest is required when data.source is 'manifest'");
  const fs::path manifest = cfg.data.manifest;
  const fs::path root = manifest_root(cfg, manifest);
  const Splits s = build_split(read_manifests(manifest), cfg.data.split);
  d.train = frames_from_manifests(s.train, root, "train");
  d.val = frames_from_manifests(s.val, root, "val");
  std::map<std::string, std::vector<VideoManifest>> by_tag;
  for (const auto& m : s.test) by_tag[m.method_tag.empty() ? "test" : m.method_tag].push_back(m);
  for (const auto& [tag, ms] : by_tag) d.tests.push_back(frames_from_manifests(ms, root, tag));
  return d;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
  }
  fs::rename(tmp, path);
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

// --- preprocess -----------------------------------------------------------

struct PreprocessArgs {
  std::string input, output, split = "test", tag, detector_cmd;
  int frames = 32;
  double margin = 1.3;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  double centered = 0.0;
  bool force = false;
};

int cmd_preprocess(const PreprocessArgs& a, std::ostream& out, std::ostream& err) {
  const fs::path manifest = fs::path(a.output) / "manifest.jsonl";
  if (fs::exists(manifest) && !a.force) {
    out << "manifest exists, skipping (use --force to rebuild): " << manifest.string() << "\n";
    return 0;
  }
  if (a.detector_cmd.empty() == (a.centered <= 0.0)) {
    err << "preprocess: give exactly one of --detector-cmd or --centered-face\n";
    return 2;
  }
  const std::string tag = a.tag.empty() ? fs::path(a.input).lexically_normal().filename().string() : a.tag;
  const auto jobs = discover_videos(a.input, split_from_string(a.split), tag.empty() ? "default" : tag);
  PreprocessOptions opts;
  opts.frames = a.frames;
  opts.margin = a.margin;
  opts.output_root = a.output;
  DetectorFactory factory;
  if (!a.detector_cmd.empty()) {
    factory = [cmd = a.detector_cmd] { return std::make_unique<CommandDetector>(cmd); };
  } else {
    factory = [f = a.centered] { return std::make_unique<StubDetector>(StubDetector::centered(f)); };
  }
  const auto stats = preprocess_videos(jobs, factory, opts, a.workers, manifest);
  out << "videos: " << stats.videos_seen << " seen, " << stats.videos_kept << " kept, " << stats.videos_excluded
      << " excluded; frames: " << stats.frames_written << " written, " << stats.frames_dropped << " dropped\n";
  for (const auto& [id, why] : stats.exclusions) out << "  excluded " << id << ": " << why << "\n";
  out << "wrote " << manifest.string() << "\n";
  if (stats.videos_kept == 0) {
    err << "preprocess: no video produced a face crop\n";
    return 1;
  }
  return 0;
}

// --- train ----------------------------------------------------------------

struct ConfigArgs {
  std::string config;
  std::vector<std::string> overrides;
};

struct TrainArgs {
  ConfigArgs cfg;
  std::string out_dir;
  bool force = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream&) {
  const fs::path dir = a.out_dir;
  const fs::path summary_path = dir / "summary.json";
  if (fs::exists(summary_path) && !a.force) {
    out << "run exists, skipping (use --force to retrain): " << summary_path.string() << "\n";
    return 0;
  }
  const TrainConfig cfg = load_config(a.cfg.config, a.cfg.overrides);
  for (const char* stale : {"summary.json", "best.safetensors", "metrics.jsonl", "INCOMPLETE"}) fs::remove(dir / stale);
  fs::remove_all(dir / "checkpoints");
  fs::create_directories(dir);
  write_json(dir / "config.json", cfg);

  try {
    TrainabilityReport report;
    Model model = prepare_model(cfg, &report);
    out << report.summary() << "\n";
    const Datasets data = load_datasets(cfg);
    TrainOptions opts;
    opts.out_dir = dir;
    opts.on_epoch = [&](const EpochRecord& e) {
      out << "epoch " << e.epoch << ": mean loss " << e.mean_loss;
      if (e.validated) out << ", val AUROC " << to_percent(e.val_auroc);
      out << "\n";
    };
    const TrainResult r = train(cfg, data.train, data.val, model, opts);
    const Checkpoint& best = select_best(r.checkpoints);
    fs::copy_file(best.path, dir / "best.safetensors", fs::copy_options::overwrite_existing);
    write_json(summary_path, {{"best_epoch", best.epoch},
                              {"best_val_auroc", best.val_auroc},
                              {"best_checkpoint", best.path.filename().string()},
                              {"steps", r.total_steps},
                              {"epochs", r.epochs.size()},
                              {"config_hash", config_hash(cfg)},
                              {"trainable", report.summary()}});
  } catch (const std::exception& e) {
    std::ofstream(dir / "INCOMPLETE") << e.what() << "\n";
    throw;
  }
  out << "wrote " << (dir / "metrics.jsonl").string() << "\n"
      << "wrote " << (dir / "checkpoints").string() << "/\n"
      << "wrote " << (dir / "best.safetensors").string() << "\n"
      << "wrote " << summary_path.string() << "\n";
  return 0;
}

// --- evaluate -------------------------------------------------------------

struct EvaluateArgs {
  std::string checkpoint, out_dir;
  std::vector<std::string> datasets;  // TAG=manifest.jsonl
  bool force = false;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream&) {
  fs::path ckpt_path = a.checkpoint;
  if (fs::is_directory(ckpt_path)) ckpt_path /= "best.safetensors";
  const auto loaded = load_checkpoint(ckpt_path);
  const TrainConfig& cfg = loaded.config;

  std::vector<FrameDataset> sets;
  if (!a.datasets.empty()) {
    for (const auto& spec : a.datasets) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("--dataset expects TAG=manifest.jsonl, got " + spec);
      const fs::path manifest = spec.substr(eq + 1);
      sets.push_back(frames_from_manifests(read_manifests(manifest), manifest_root(cfg, manifest), spec.substr(0, eq)));
    }
  } else {
    sets = load_datasets(cfg).tests;
  }
  if (sets.empty()) throw InputError("no evaluation datasets");

  const fs::path dir = a.out_dir;
  std::vector<fs::path> written;
  std::optional<Model> model;
  for (const auto& ds : sets) {
    const fs::path path = dir / (ds.tag + ".jsonl");
    if (fs::exists(path) && !a.force) {
      out << "predictions exist, skipping: " << path.string() << "\n";
      continue;
    }
    if (ds.frames.empty()) throw InputError("dataset " + ds.tag + " has no frames");
    if (!model) {
      model.emplace(prepare_model(cfg));
      restore(*model, loaded.checkpoint);
    }
    write_predictions(path, predict(*model, cfg, ds));
    written.push_back(path);
  }
  const std::string ckpt_id = ckpt_path.stem().string() + "@epoch" + std::to_string(loaded.checkpoint.epoch);
  write_json(dir / "run.json",
             {{"setup_name", to_string(cfg.setup)}, {"checkpoint_id", ckpt_id}, {"config_hash", config_hash(cfg)}});
  for (const auto& p : written) out << "wrote " << p.string() << "\n";
  out << "wrote " << (dir / "run.json").string() << "\n";
  return 0;
}

// --- report ---------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> predictions;
  std::string out;
  bool force = false;
};

EvalReport report_for(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("not a predictions directory: " + dir.string());
  EvalReport r;
  r.setup_name = dir.filename().string();
  if (fs::exists(dir / "run.json")) {
    const auto j = read_json(dir / "run.json");
    r.setup_name = j.value("setup_name", r.setup_name);
    r.checkpoint_id = j.value("checkpoint_id", "");
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("no prediction files (*.jsonl) in " + dir.string());
  for (const auto& f : files) r.per_dataset[f.stem().string()] = to_percent(video_auroc(read_predictions(f)));
  return r;
}

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream&) {
  auto txt = fs::path(a.out);
  txt += ".txt";
  if (fs::exists(txt) && !a.force) {
    out << "report exists, skipping (use --force to rebuild): " << txt.string() << "\n";
    return 0;
  }
  std::vector<EvalReport> reports;
  for (const auto& d : a.predictions) reports.push_back(report_for(d));
  const auto paths = emit_report(reports, a.out);
  out << format_table(reports);
  for (const auto& p : paths) out << "wrote " << p.string() << "\n";
  return 0;
}

// --- plot -----------------------------------------------------------------

struct PlotArgs {
  std::vector<std::string> runs;
  std::string out;
  bool force = false;
};

CurveSeries curve_for(const fs::path& run) {
  CurveSeries s;
  s.label = run.filename().string();
  if (fs::exists(run / "config.json")) {
    s.label = setup_display_name(read_json(run / "config.json").value("setup", s.label));
  }
  std::ifstream in(run / "metrics.jsonl");
  if (!in) throw InputError("no metrics.jsonl in " + run.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (j.value("type", "") == "epoch" && j.contains("val_auroc")) {
      s.points.emplace_back(j.at("epoch").get<int>(), j.at("val_auroc").get<double>());
    }
  }
  if (s.points.empty()) throw InputError("no validated epochs in " + (run / "metrics.jsonl").string());
  return s;
}

int cmd_plot(const PlotArgs& a, std::ostream& out, std::ostream&) {
  auto png = fs::path(a.out);
  png += ".png";
  if (fs::exists(png) && !a.force) {
    out << "plot exists, skipping (use --force to redraw): " << png.string() << "\n";
    return 0;
  }
  std::vector<CurveSeries> series;
  for (const auto& r : a.runs) series.push_back(curve_for(r));
  for (const auto& p : emit_plot(series, a.out)) out << "wrote " << p.string() << "\n";
  return 0;
}

// --- inspect --------------------------------------------------------------

struct InspectArgs {
  ConfigArgs cfg;
  bool names = false;
};

int cmd_inspect(const InspectArgs& a, std::ostream& out, std::ostream&) {
  const TrainConfig cfg = load_config(a.cfg.config, a.cfg.overrides);
  const auto spec = encoder_spec_by_name(cfg.encoder);
  const char* env = std::getenv("DFD_WEIGHTS");
  const bool have_weights = !cfg.weights.empty() || (env && *env);
  TrainabilityReport report;
  std::string source;
  if (have_weights || spec.name == toy_encoder_spec().name) {
    Model model = prepare_model(cfg, &report);
    source = have_weights ? "loaded weights" : "random init";
  } else {
    report = apply_adapter(parameter_tree(spec), cfg.adapter).second;
    source = "architecture only, no weights file";
  }
  out << "encoder: " << spec.name << " (" << source << ")\n"
      << "adapter: " << to_string(cfg.adapter.strategy) << "\n"
      << report.summary() << "\n";
  if (a.names) {
    for (const auto& n : report.trainable_names) out << "  " << n << "\n";
  }
  return 0;
}

void add_config_options(CLI::App* sub, ConfigArgs& c) {
  sub->add_option("--config", c.config, "preset name (setup1..5, toy-setup1..5) or JSON file")->required();
  sub->add_option("--set,--overrides", c.overrides, "key.path=value overrides of existing config keys")
      ->allow_extra_args(false);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deepfake detection with parameter-efficient CLIP fine-tuning"};
  app.require_subcommand(1);

  PreprocessArgs pa;
  auto* pre = app.add_subcommand("preprocess", "sample frames, crop faces, write PNGs and a manifest");
  pre->add_option("--input", pa.input, "directory with real/ and fake/ subdirectories")->required();
  pre->add_option("--output", pa.output, "data root for crops and manifest.jsonl")->required();
  pre->add_option("--frames", pa.frames, "frames sampled per video")->capture_default_str();
  pre->add_option("--margin", pa.margin, "box expansion factor")->capture_default_str();
  pre->add_option("--workers", pa.workers, "parallel videos")->capture_default_str();
  pre->add_option("--split", pa.split, "split recorded in the manifest")->capture_default_str();
  pre->add_option("--tag", pa.tag, "method tag for videos directly under real/ or fake/");
  pre->add_option("--detector-cmd", pa.detector_cmd, "external detector command (JSON box + landmarks on stdout)");
  pre->add_option("--centered-face", pa.centered, "stub detector: centered square of this fraction of the short side");
  pre->add_flag("--force", pa.force, "rebuild existing outputs");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "train a head/adapter and write checkpoints and a metrics log");
  add_config_options(tr, ta.cfg);
  tr->add_option("--out", ta.out_dir, "run directory")->required();
  tr->add_flag("--force", ta.force, "retrain even if the run directory is complete");

  EvaluateArgs ea;
  auto* ev = app.add_subcommand("evaluate", "dump per-frame predictions for each test dataset");
  ev->add_option("--checkpoint", ea.checkpoint, "checkpoint file or train run directory")->required();
  ev->add_option("--out", ea.out_dir, "predictions directory")->required();
  ev->add_option("--dataset", ea.datasets, "TAG=manifest.jsonl (repeatable); default: the config's test data");
  ev->add_flag("--force", ea.force, "overwrite existing prediction files");

  ReportArgs ra;
  auto* rep = app.add_subcommand("report", "video-level AUROC table from prediction directories");
  rep->add_option("--predictions", ra.predictions, "predictions directory, one table row each")->required();
  rep->add_option("--out", ra.out, "output stem (.txt and .json are added)")->required();
  rep->add_flag("--force", ra.force, "overwrite an existing report");

  PlotArgs pl;
  auto* plot = app.add_subcommand("plot", "validation AUROC curves from train run directories");
  plot->add_option("--run", pl.runs, "train run directory (repeatable)")->required();
  plot->add_option("--out", pl.out, "output stem (.json and .png are added)")->required();
  plot->add_flag("--force", pl.force, "overwrite existing plot files");

  InspectArgs ia;
  auto* ins = app.add_subcommand("inspect", "print the trainable parameter count for a config");
  add_config_options(ins, ia.cfg);
  ins->add_flag("--names", ia.names, "list trainable parameter names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*pre) return cmd_preprocess(pa, out, err);
    if (*tr) return cmd_train(ta, out, err);
    if (*ev) return cmd_evaluate(ea, out, err);
    if (*rep) return cmd_report(ra, out, err);
    if (*plot) return cmd_plot(pl, out, err);
    if (*ins) return cmd_inspect(ia, out, err);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("dfd");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace dfd::cli
