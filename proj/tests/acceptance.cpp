// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include "dfd/backbone.hpp"
#include "dfd/cli.hpp"
#include "dfd/error.hpp"
#include "dfd/frames.hpp"
#include "dfd/losses.hpp"
#include "dfd/manifest.hpp"
#include "dfd/manifold.hpp"
#include "dfd/metrics.hpp"
#include "dfd/peft.hpp"
#include "dfd/preprocess.hpp"
#include "dfd/schedule.hpp"
#include "dfd/synthetic.hpp"
#include "dfd/trainer.hpp"
#include "generators.hpp"
#include "oracles.hpp"
#include "planted_video.hpp"

#include <opencv2/imgcodecs.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

using namespace dfd;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kSlerpTol = 1e-6;
constexpr int kSlerpPairs = 10000;
constexpr double kSlerpBudget = 10;
constexpr double kLossTol = 1e-6;
constexpr double kLossGradRelTol = 1e-3;
constexpr int kLossBatches = 200;
constexpr double kLossBudget = 60;
constexpr int kAurocInstances = 1000;
constexpr double kMonotoneTol = 1e-12;
constexpr double kAurocBudget = 30;
constexpr double kLnCount = 104e3;
constexpr double kLnCountRel = 0.05;
constexpr double kFracLo = 0.0002, kFracHi = 0.0005;
constexpr double kPeftBudget = 120;
constexpr double kMidpointRelTol = 1e-12;
constexpr int kScheduleGrid = 10000;
constexpr double kToyAuroc = 0.99;
constexpr long kToyStepCap = 200;
constexpr double kToyBudget = 300;
constexpr double kMargin = 1.3;

// Collects the first few failure messages of a criterion.
struct Check {
  int failures = 0;
  std::string first;
  std::string note;

  void operator()(bool ok, const std::string& what) {
    if (ok) return;
    if (failures++ == 0) first = what;
  }
};

int g_failed = 0;

void report(const std::string& name, const std::function<void(Check&)>& body, double budget_s = 0) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0) {
    std::ostringstream b;
    b << "runtime " << secs << " s over budget " << budget_s << " s";
    c(secs <= budget_s, b.str());
  }
  std::cout << (c.failures == 0 ? "PASS " : "FAIL ") << name << " (" << std::fixed;
  std::cout.precision(2);
  std::cout << secs << " s";
  if (!c.note.empty()) std::cout << "; " << c.note;
  if (c.failures) std::cout << "; " << c.failures << " failed checks, first: " << c.first;
  std::cout << ")" << std::endl;
  std::cout.unsetf(std::ios::floatfield);
  if (c.failures) ++g_failed;
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

double max_abs(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff(); }

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("dfd_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// --- criteria ---------------------------------------------------------------

void slerp_suite(Check& check) {
  std::mt19937_64 rng(101);
  double worst = 0;
  auto near = [&](double err, const char* what) {
    worst = std::max(worst, err);
    check(err <= kSlerpTol, std::string(what) + " error " + fmt(err));
  };
  for (int i = 0; i < kSlerpPairs; ++i) {
    const int d = gen::uniform_int(rng, 2, 64);
    const Vector x = gen::unit_vector(rng, d);
    const Vector y = gen::unit_vector(rng, d);
    const double t = gen::uniform(rng, 0.0, 1.0);
    near(max_abs(slerp(x, y, 0.0), x), "endpoint t=0");
    near(max_abs(slerp(x, y, 1.0), y), "endpoint t=1");
    const Vector z = slerp(x, y, t);
    near(std::abs(z.norm() - 1.0), "unit norm");
    near(max_abs(z, slerp(y, x, 1.0 - t)), "symmetry");
    near(max_abs(z, oracle::slerp(x, y, t)), "oracle agreement");

    // Orthogonal pair: the midpoint has sqrt(2)/2 along both axes.
    const int a = gen::uniform_int(rng, 0, d - 1);
    const int b = (a + gen::uniform_int(rng, 1, d - 1)) % d;
    const Vector ea = Vector::Unit(d, a), eb = Vector::Unit(d, b);
    const Vector mid = slerp(ea, eb, 0.5);
    Vector expect = Vector::Zero(d);
    expect(a) = expect(b) = std::sqrt(2.0) / 2.0;
    near(max_abs(mid, expect), "orthogonal midpoint");

    // Near-parallel: continuous with the normalized chord.
    const double gap = std::pow(10.0, gen::uniform(rng, -12.0, -4.0));
    const Vector y_close = (x + gap * gen::unit_vector(rng, d)).normalized();
    const Vector chord = ((1.0 - t) * x + t * y_close).normalized();
    near(max_abs(slerp(x, y_close, t), chord), "near-parallel continuity");
  }
  check.note = std::to_string(kSlerpPairs) + " pairs, worst error " + fmt(worst);
}

void loss_suite(Check& check) {
  std::mt19937_64 rng(202);
  const double alpha = 2.0, t = 2.0, tau = 0.1;
  double worst_value = 0, worst_grad = 0;
  for (int i = 0; i < kLossBatches; ++i) {
    const int b = gen::uniform_int(rng, 2, 16);
    const int d = gen::uniform_int(rng, 2, 16);
    const Matrix x = gen::unit_rows(rng, b, d);
    const auto y = gen::labels_with_pair(rng, b);

    const double dv[] = {std::abs(alignment_loss(x, y, alpha) - oracle::alignment(x, y, alpha)),
                         std::abs(uniformity_loss(x, t) - oracle::uniformity(x, t)),
                         std::abs(supcon_loss(x, y, tau) - oracle::supcon(x, y, tau))};
    for (double v : dv) {
      worst_value = std::max(worst_value, v);
      check(v <= kLossTol, "value mismatch " + fmt(v) + " at batch " + std::to_string(i));
    }

    const auto ga = alignment_loss_with_grad(x, y, alpha);
    const auto gu = uniformity_loss_with_grad(x, t);
    const auto gs = supcon_loss_with_grad(x, y, tau);
    const double rel[] = {
        oracle::relative_error(ga.grad, oracle::numeric_grad([&](const Matrix& m) { return oracle::alignment(m, y, alpha); }, x)),
        oracle::relative_error(gu.grad, oracle::numeric_grad([&](const Matrix& m) { return oracle::uniformity(m, t); }, x)),
        oracle::relative_error(gs.grad, oracle::numeric_grad([&](const Matrix& m) { return oracle::supcon(m, y, tau); }, x))};
    for (double r : rel) {
      worst_grad = std::max(worst_grad, r);
      check(r <= kLossGradRelTol, "gradient relative error " + fmt(r) + " at batch " + std::to_string(i));
    }
  }
  check.note = "worst value diff " + fmt(worst_value) + ", worst grad rel err " + fmt(worst_grad);
}

void auroc_suite(Check& check) {
  std::mt19937_64 rng(303);
  for (int i = 0; i < kAurocInstances; ++i) {
    const int n = gen::uniform_int(rng, 2, 300);
    const auto y = gen::labels(rng, n);
    // Few score levels: many ties.
    const auto s = gen::tied_scores(rng, n, gen::uniform_int(rng, 1, 6));
    const auto c = auroc_counts(s, y);
    const auto o = oracle::pair_count(s, y);
    check(c.twice_u == o.twice_u && c.positives == o.positives && c.negatives == o.negatives,
          "pair counts differ at instance " + std::to_string(i));
    const double a = auroc(s, y);
    check(a == auroc_from_counts({o.twice_u, o.positives, o.negatives}), "auroc differs from counted value");

    std::vector<double> cubed(s), squashed(s);
    for (auto& v : cubed) v = v * v * v + 3.0;
    for (auto& v : squashed) v = 1.0 / (1.0 + std::exp(-v));
    check(std::abs(auroc(cubed, y) - a) <= kMonotoneTol, "cube transform changed AUROC");
    check(std::abs(auroc(squashed, y) - a) <= kMonotoneTol, "logistic transform changed AUROC");

    std::vector<int> flipped(y);
    for (auto& l : flipped) l = 1 - l;
    check(a + auroc(s, flipped) == 1.0, "complement identity broken at instance " + std::to_string(i));
  }
  check.note = std::to_string(kAurocInstances) + " instances";
}

void peft_structural(Check& check) {
  const auto spec = clip_vit_l14_spec();
  const auto [ln_tree, ln] = apply_adapter(parameter_tree(spec), AdapterSpec::defaults(PeftStrategy::ln_tuning));
  check(std::abs(ln.trainable_count - kLnCount) <= kLnCountRel * kLnCount,
        "ln_tuning count " + std::to_string(ln.trainable_count));
  check(ln.fraction >= kFracLo && ln.fraction <= kFracHi, "ln_tuning fraction " + fmt(ln.fraction));
  const auto [lp_tree, lp] = apply_adapter(parameter_tree(spec), AdapterSpec::defaults(PeftStrategy::linear_probe));
  check(lp.trainable_count == 1024 * 2 + 2, "linear probe count " + std::to_string(lp.trainable_count));
  check.note = ln.summary() + "; linear probe " + std::to_string(lp.trainable_count);

  if (const char* w = std::getenv("DFD_WEIGHTS"); w && *w) {
    auto model = Model::from_pretrained(spec, w, 0);
    const auto live = apply_adapter(model, AdapterSpec::defaults(PeftStrategy::ln_tuning), 0);
    check(live.trainable_count == ln.trainable_count, "loaded model count " + std::to_string(live.trainable_count));
    check(live.total_count == ln.total_count, "loaded model total " + std::to_string(live.total_count));
    check.note += "; verified against " + std::string(w);
  } else {
    check.note += "; structural only (DFD_WEIGHTS unset)";
  }
}

void schedule_check(Check& check) {
  const double lo = 5e-5, hi = 8e-5;
  check(cosine_lr(0, kScheduleGrid, hi, lo) == hi, "lr(0) not exact");
  check(cosine_lr(kScheduleGrid, kScheduleGrid, hi, lo) == lo, "lr(end) not exact");
  const double mid = cosine_lr(kScheduleGrid / 2, kScheduleGrid, hi, lo);
  check(std::abs(mid - 6.5e-5) <= kMidpointRelTol * 6.5e-5, "midpoint " + fmt(mid));
  double prev = INFINITY;
  for (long s = 0; s <= kScheduleGrid; ++s) {
    const double v = cosine_lr(s, kScheduleGrid, hi, lo);
    check(v <= prev, "increase at step " + std::to_string(s));
    prev = v;
  }
  check.note = "midpoint " + fmt(mid);
}

void toy_end_to_end(Check& check) {
  const auto cfg = toy_preset(5);
  const auto splits = make_synthetic_splits(cfg.data.synthetic);
  auto model = prepare_model(cfg);
  const auto frozen = model.frozen_names();
  const auto r = train(cfg, splits.train, splits.val, model);
  check(r.total_steps <= kToyStepCap, "took " + std::to_string(r.total_steps) + " steps");
  double best = 0;
  for (const auto& e : r.epochs)
    if (e.validated) best = std::max(best, e.val_auroc);
  check(best >= kToyAuroc, "best validation AUROC " + fmt(best));
  check(r.frozen_checksum_before == r.frozen_checksum_after, "frozen checksum changed during training");
  check(model.checksum(frozen) == r.frozen_checksum_before, "frozen checksum differs after training");

  auto again = prepare_model(cfg);
  const auto r2 = train(cfg, splits.train, splits.val, again);
  check(!r.epochs.empty() && !r2.epochs.empty() && r.epochs[0].mean_loss == r2.epochs[0].mean_loss,
        "epoch-0 loss not reproduced");
  check(r.steps[0].loss.total == r2.steps[0].loss.total, "first step loss not reproduced");
  check.note = std::to_string(splits.train.frames.size()) + " train frames, " + std::to_string(r.total_steps) +
               " steps, best val AUROC " + fmt(best) + ", epoch-0 loss " + fmt(r.epochs.at(0).mean_loss);
}

void pipeline_geometry(Check& check) {
  const auto dir = temp_dir("pipeline");
  struct Planted {
    std::string id;
    int label, length;
    planted::Face face;
    bool avi;
  };
  const std::vector<Planted> videos{{"real/a", 0, 100, {{96, 64, 64, 64}}, false},
                                    {"real/b", 0, 45, {{40, 30, 90, 90}}, false},
                                    {"fake/DF/c", 1, 33, {{150, 100, 50, 70}}, false},
                                    {"fake/DF/d", 1, 64, {{100, 80, 80, 80}}, true},
                                    {"real/hidden", 0, 40, {{96, 64, 64, 64}, false}, false},
                                    {"fake/DF/hidden", 1, 20, {{96, 64, 64, 64}, false}, false}};
  std::vector<VideoJob> jobs;
  for (const auto& v : videos) {
    fs::path src = dir / "in" / v.id;
    bool written = false;
    if (v.avi) {
      src += ".avi";
      fs::create_directories(src.parent_path());
      written = planted::write_avi(src, v.length, 320, 240, v.face);
    }
    if (!written) {
      src = dir / "in" / v.id;
      planted::write_frame_dir(src, v.length, 320, 240, v.face);
    }
    jobs.push_back({v.id, src, v.label, v.label ? "DF" : "", Split::test});
  }
  PreprocessOptions opts;
  opts.frames = 32;
  opts.margin = kMargin;
  opts.output_root = dir / "out";
  const auto stats = preprocess_videos(
      jobs, [] { return std::make_unique<planted::ThresholdDetector>(); }, opts, 2, dir / "out" / "manifest.jsonl");

  check(stats.videos_seen == 6, "videos seen " + std::to_string(stats.videos_seen));
  check(stats.videos_kept == 4, "videos kept " + std::to_string(stats.videos_kept));
  check(stats.videos_excluded == 2, "videos excluded " + std::to_string(stats.videos_excluded));
  std::map<std::string, std::string> reasons(stats.exclusions.begin(), stats.exclusions.end());
  check(reasons.count("real/hidden") && reasons.count("fake/DF/hidden"), "hidden-face videos not in exclusions");

  // The 1.3x expansion in isolation.
  check(expand_box({100, 100, 200, 200}, kMargin) == Box{85, 85, 215, 215}, "expand_box(100..200) arithmetic");

  std::map<std::string, VideoManifest> by_id;
  for (auto& m : read_manifests(dir / "out" / "manifest.jsonl")) by_id[m.video_id] = m;
  check(by_id.size() == 4, "manifest has " + std::to_string(by_id.size()) + " videos");
  int crops = 0;
  for (const auto& v : videos) {
    if (!v.face.visible) {
      check(!by_id.count(v.id), v.id + " should be excluded");
      continue;
    }
    if (!by_id.count(v.id)) {
      check(false, v.id + " missing from manifest");
      continue;
    }
    const auto& m = by_id[v.id];
    const auto expect_idx = oracle::sample_frames(v.length, 32);
    check(m.frames.size() == expect_idx.size(), v.id + " frame count");
    const cv::Rect& f = v.face.rect;
    const double cx = f.x + f.width / 2.0, cy = f.y + f.height / 2.0;
    const double hw = f.width * kMargin / 2.0, hh = f.height * kMargin / 2.0;
    const Box expect_box{cx - hw, cy - hh, cx + hw, cy + hh};
    for (std::size_t i = 0; i < m.frames.size() && i < expect_idx.size(); ++i) {
      const auto& fr = m.frames[i];
      check(fr.frame_index == expect_idx[i], v.id + " frame index " + std::to_string(fr.frame_index));
      // AVI frames are lossy; the detector box can move by a pixel there.
      if (!v.avi || fs::is_directory(m.source_path))
        check(fr.face_box == expect_box, v.id + " expanded box not exact");
      const cv::Mat png = cv::imread((opts.output_root / fr.image_path).string(), cv::IMREAD_UNCHANGED);
      check(png.rows == 256 && png.cols == 256 && png.channels() == 3 && png.depth() == CV_8U,
            v.id + " crop is not 256x256x3 8-bit");
      ++crops;
    }
  }
  check.note = std::to_string(stats.videos_kept) + " kept, " + std::to_string(stats.videos_excluded) +
               " excluded, " + std::to_string(crops) + " crops checked";
  fs::remove_all(dir);
}

void ablation_plumbing(Check& check) {
  const auto dir = temp_dir("ablation");
  auto run = [&](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    check(code == 0, args[0] + " exited " + std::to_string(code) + ": " + err.str());
    return code == 0;
  };
  std::vector<std::string> report_args{"report"}, plot_args{"plot"};
  for (int i = 1; i <= 5; ++i) {
    const std::string name = "setup" + std::to_string(i);
    const auto run_dir = (dir / "runs" / name).string();
    const auto pred_dir = (dir / "preds" / name).string();
    if (!run({"train", "--config", "toy-" + name, "--out", run_dir})) return;
    if (!run({"evaluate", "--checkpoint", run_dir, "--out", pred_dir})) return;
    report_args.insert(report_args.end(), {"--predictions", pred_dir});
    plot_args.insert(plot_args.end(), {"--run", run_dir});
  }
  report_args.insert(report_args.end(), {"--out", (dir / "table").string()});
  plot_args.insert(plot_args.end(), {"--out", (dir / "curves").string()});
  if (!run(report_args) || !run(plot_args)) return;

  std::ifstream table_in(dir / "table.json");
  const auto table = nlohmann::json::parse(table_in);
  check(table.at("rows").size() == 5, "table rows " + std::to_string(table.at("rows").size()));
  for (const auto& row : table.at("rows"))
    check(row.at("per_dataset").size() == table.at("columns").size(), "row with missing datasets");
  std::ifstream curves_in(dir / "curves.json");
  const auto curves = nlohmann::json::parse(curves_in).at("series");
  check(curves.size() == 5, "curve series " + std::to_string(curves.size()));
  for (const auto& s : curves) check(!s.at("points").empty(), "empty curve");
  check(fs::exists(dir / "curves.png") && fs::exists(dir / "table.txt"), "missing rendered outputs");

  std::ifstream txt(dir / "table.txt");
  std::cout << std::string(std::istreambuf_iterator<char>(txt), {});
  check.note = "5 rows x " + std::to_string(table.at("columns").size()) + " datasets";
  fs::remove_all(dir);
}

}  // namespace

int main() {
  report("slerp suite", slerp_suite, kSlerpBudget);
  report("loss oracle suite", loss_suite, kLossBudget);
  report("auroc suite", auroc_suite, kAurocBudget);
  report("peft structural check", peft_structural, kPeftBudget);
  report("schedule check", schedule_check);
  report("toy end-to-end", toy_end_to_end, kToyBudget);
  report("pipeline geometry", pipeline_geometry);
  report("ablation plumbing", ablation_plumbing);
  std::cout << (g_failed == 0 ? "all criteria passed" : std::to_string(g_failed) + " criteria failed") << std::endl;
  return g_failed == 0 ? 0 : 1;
}
