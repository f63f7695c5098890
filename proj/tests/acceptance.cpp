// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when any
// criterion fails. Tolerances and budgets are fixed here.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <queue>
#include <set>

#include "sparseseg/augment.hpp"
#include "sparseseg/bench.hpp"
#include "sparseseg/metrics.hpp"
#include "sparseseg/sampler.hpp"
#include "sparseseg/superpixels.hpp"
#include "cli_runner.hpp"
#include "service_fixture.hpp"

using namespace sparseseg;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kFieldTol = 1e-9;
constexpr double kHandTol = 1e-12;
constexpr double kIncrementalTol = 1e-12;
constexpr double kFieldBudgetS = 5.0;
constexpr std::size_t kMergePixels = 10000;
constexpr int kEndToEndRuns = 200;
constexpr double kTrendMarginPts = 2.0;
constexpr double kTrendBudgetS = 180.0;
constexpr double kAugmentBudgetS = 1.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<Bitmap> bitmaps(const ProposalSet& s) {
  std::vector<Bitmap> out;
  for (const auto& m : s.masks) out.push_back(*m.bitmap);
  return out;
}

// 1. O, E and A against brute force.
Outcome fields_oracle() {
  std::mt19937_64 gen(1001);
  const auto t0 = Clock::now();
  double worst = 0;
  const ImageDims d(32, 32);
  for (int inst = 0; inst < 100; ++inst) {
    const ProposalSet props = testing::random_proposals(d, gen, 5);
    const int k = testing::uniform_int(gen, 0, 10);
    std::vector<PixelCoord> pts;
    for (const auto& p : testing::random_points(d, gen, k, 2)) pts.push_back(p.point);
    const double lambda = std::uniform_real_distribution<>(0, 1)(gen);

    const auto O = object_proximity(props, d);
    const auto E = exploration<double>(std::span<const PixelCoord>(pts), d);
    const Grid<double> A = acquisition_map(O, E, lambda);
    const auto masks = bitmaps(props);
    for (int y = 0; y < d.height; ++y) {
      for (int x = 0; x < d.width; ++x) {
        const double o = testing::oracle::object_proximity(masks, d, x, y);
        const double e = testing::oracle::exploration(pts, d, x, y);
        worst = std::max({worst, std::abs(O(y, x) - o), std::abs(E(y, x) - e),
                          std::abs(A(y, x) - (lambda * o + (1 - lambda) * e))});
      }
    }
  }
  const double t = seconds_since(t0);
  return {worst <= kFieldTol && t < kFieldBudgetS,
          "max abs error " + fmt("%.3g", worst) + ", " + fmt("%.2f s", t)};
}

// 2. Hand-computed values.
Outcome hand_values() {
  const ImageDims d4(4, 4);
  Bitmap sq = Bitmap::Constant(4, 4, false);
  sq.block(1, 1, 2, 2).setConstant(true);
  const double o = object_proximity(ProposalSet(d4, {make_candidate(0, sq, 1)}), d4)(1, 1);
  const std::vector<PixelCoord> q{{0, 0}};
  const double e = exploration<double>(std::span<const PixelCoord>(q), ImageDims(4, 3))(0, 3);
  const bool ok = std::abs(o - 0.875) <= kHandTol && std::abs(e - 0.6) <= kHandTol;
  return {ok, "O(1,1) = " + fmt("%.15g", o) + ", E(3,0) = " + fmt("%.15g", e)};
}

// 3. Incremental E equals a full recompute after every insertion.
Outcome incremental_exploration() {
  std::mt19937_64 gen(1003);
  double worst = 0;
  int checks = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const ImageDims d(testing::uniform_int(gen, 8, 40), testing::uniform_int(gen, 8, 40));
    SamplerConfig cfg;
    cfg.strategy = Strategy::DynamicOnlyA;
    cfg.budget = 30;
    cfg.lambda = std::uniform_real_distribution<>(0, 1)(gen);
    SamplerState state(cfg, std::make_shared<const ProposalSet>(testing::random_proposals(d, gen, 5)));
    std::vector<PixelCoord> queried;
    for (int i = 0; i < 30; ++i) {
      // Alternate between the acquisition argmax and arbitrary free pixels.
      PixelCoord p = state.select_next_active_point();
      if (i % 2) {
        do {
          p = {testing::uniform_int(gen, 0, d.width - 1), testing::uniform_int(gen, 0, d.height - 1)};
        } while (state.is_selected(p));
      }
      state.commit(p, 0);
      queried.push_back(p);
      const auto full = exploration<double>(std::span<const PixelCoord>(queried), d);
      worst = std::max(worst, (state.exploration() - full).abs().maxCoeff());
      ++checks;
    }
  }
  return {worst <= kIncrementalTol, std::to_string(checks) + " insertions, max abs error " + fmt("%.3g", worst)};
}

// 4. Overlap resolution against exhaustive per-pixel evaluation.
Outcome merge_oracle() {
  std::mt19937_64 gen(1004);
  std::size_t compared = 0, covered = 0, overlapped = 0, mismatches = 0;
  for (int inst = 0; inst < 60; ++inst) {
    const ImageDims d(testing::uniform_int(gen, 12, 40), testing::uniform_int(gen, 12, 40));
    const ProposalSet props = testing::random_proposals(d, gen, 5);
    const PointLabelSet pts = testing::random_points(d, gen, testing::uniform_int(gen, 1, 8), 3);
    const FileProposalProvider provider(props);
    const auto expanded = expand_points(pts, provider);
    const PartialSegmentation merged = merge_masks(expanded, pts, d);
    std::vector<testing::oracle::ExpandedRef> refs;
    for (const auto& e : expanded) {
      refs.push_back({e.source.point, e.source.label, e.mask ? e.mask->bitmap.get() : nullptr});
    }
    for (int y = 0; y < d.height; ++y) {
      for (int x = 0; x < d.width; ++x) {
        const ClassId want = testing::oracle::merged_label(refs, pts, d, x, y);
        int depth = 0;
        for (const auto& r : refs) depth += r.mask && (*r.mask)(y, x);
        ++compared;
        covered += depth > 0;
        overlapped += depth > 1;
        mismatches += merged.map({x, y}) != want || merged.covered(y, x) != (want != kUnlabeled);
      }
    }
  }
  return {mismatches == 0 && compared >= kMergePixels && overlapped > 0,
          std::to_string(compared) + " pixels (" + std::to_string(covered) + " covered, " +
              std::to_string(overlapped) + " in overlaps), " + std::to_string(mismatches) + " mismatches"};
}

// 5. Complete maps that honour every queried point.
Outcome end_to_end_postconditions() {
  std::mt19937_64 gen(1005);
  const Strategy strategies[] = {Strategy::Random, Strategy::Grid, Strategy::Centroid, Strategy::DynamicOnlyA,
                                 Strategy::Dynamic};
  int failures = 0;
  for (int run = 0; run < kEndToEndRuns; ++run) {
    const ImageDims d(testing::uniform_int(gen, 8, 48), testing::uniform_int(gen, 8, 48));
    const RgbImage img = testing::blocky_image(d, gen);
    const int classes = testing::uniform_int(gen, 2, 6);
    SamplerConfig cfg;
    cfg.strategy = strategies[run % 5];
    cfg.budget = testing::uniform_int(gen, 1, 30);
    cfg.lambda = std::uniform_real_distribution<>(0, 1)(gen);
    cfg.random_ratio = std::uniform_real_distribution<>(0, 1)(gen);
    cfg.seed = gen();
    const bool fallback = run % 3 == 0;
    const ProposalSet props = fallback ? generate_fallback_proposals(img) : testing::random_proposals(d, gen, 6);
    const std::uint64_t salt = gen();
    const Annotator annotator = [&](PixelCoord p) {
      return ClassId((std::uint64_t(p.x) * 73856093u ^ std::uint64_t(p.y) * 19349663u ^ salt) % classes);
    };
    const PointLabelSet pts = sample_points(cfg, d, std::make_shared<const ProposalSet>(props), annotator);
    const FileProposalProvider provider(props);
    SlicConfig slic;
    slic.superpixels = testing::uniform_int(gen, 1, 200);
    const LabelMap map = augment(img, pts, provider, slic);
    bool ok = map.sentinel_count() == 0 && int(pts.size()) == cfg.budget;
    for (const PointLabel& p : pts) ok = ok && map(p.point) == p.label;
    failures += !ok;
  }
  return {failures == 0, std::to_string(kEndToEndRuns) + " runs, " + std::to_string(failures) + " violations"};
}

// 6. Worked instance, masked variant and metric inequalities.
Outcome metrics() {
  LabelMap gt(ImageDims(2, 2)), pred(ImageDims(2, 2));
  gt.data() << 0, 0, 1, 1;
  pred.data() << 0, 1, 1, 1;
  LabelSchema schema = LabelSchema::with_default_names(2);
  ConfusionMatrix cm(2);
  cm.accumulate(gt, pred);
  const MetricSummary s = compute_metrics(cm, schema, false);
  schema.background_id = 1;
  const MetricSummary m = compute_metrics(cm, schema, true);
  bool ok = s.mean_pa == 0.75 && std::abs(s.mean_iou - 7.0 / 12.0) <= 1e-15 && m.mean_pa == 0.5 && m.mean_iou == 0.5;
  std::string detail = "mPA " + fmt("%.6f", s.mean_pa) + ", mIoU " + fmt("%.6f", s.mean_iou) + ", masked " +
                       fmt("%.2f", m.mean_pa) + "/" + fmt("%.2f", m.mean_iou);

  std::mt19937_64 gen(1006);
  int violations = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int k = testing::uniform_int(gen, 2, 6);
    const ImageDims d(testing::uniform_int(gen, 1, 16), testing::uniform_int(gen, 1, 16));
    LabelMap g(d), p(d), fp_bg(d);
    for (int y = 0; y < d.height; ++y) {
      for (int x = 0; x < d.width; ++x) {
        g({x, y}) = ClassId(testing::uniform_int(gen, 0, k - 1));
        p({x, y}) = ClassId(testing::uniform_int(gen, 0, k - 1));
        // Foreground errors collapse to background so every foreground FP sits
        // on ground-truth background.
        fp_bg({x, y}) = g({x, y}) != 0 && gen() % 3 == 0 ? ClassId(0) : g({x, y}) != 0 ? g({x, y}) : p({x, y});
      }
    }
    const LabelSchema sc = LabelSchema::with_default_names(k);
    ConfusionMatrix a(k), b(k);
    a.accumulate(g, p);
    b.accumulate(g, fp_bg);
    const MetricSummary sa = compute_metrics(a, sc, false);
    for (const auto& c : sa.per_class) violations += c.pa && c.iou && *c.iou > *c.pa + 1e-15;
    violations += sa.mean_iou > sa.mean_pa + 1e-15;
    const MetricReport rb = make_report(b, sc);
    if (std::isnan(rb.masked_mIoU())) continue;
    for (std::size_t c = 1; c < rb.standard.per_class.size(); ++c) {
      const auto& st = rb.standard.per_class[c];
      const auto& ms = rb.masked.per_class[c];
      if (st.iou && ms.iou) violations += *ms.iou + 1e-15 < *st.iou;
    }
  }

  // Oversegmentation of a small object: standard IoU is low, masked IoU high.
  LabelMap g3(ImageDims(40, 40), 0), p3(ImageDims(40, 40), 0);
  for (int y = 0; y < 40; ++y) {
    for (int x = 0; x < 40; ++x) {
      if (std::abs(x - 20) < 6 && std::abs(y - 20) < 6) g3({x, y}) = 1;
      if (std::abs(x - 20) < 10 && std::abs(y - 20) < 10) p3({x, y}) = 1;
    }
  }
  ConfusionMatrix c3(2);
  c3.accumulate(g3, p3);
  const MetricReport r3 = make_report(c3, LabelSchema::with_default_names(2));
  const double iou1 = *r3.standard.per_class[1].iou, miou1 = *r3.masked.per_class[1].iou;
  ok = ok && violations == 0 && miou1 > iou1;
  detail += ", " + std::to_string(violations) + " property violations, object IoU " + fmt("%.3f", iou1) +
            " vs masked " + fmt("%.3f", miou1);
  return {ok, detail};
}

struct SyntheticBench {
  testing::TempDir dir{"acceptance-bench"};
  bench::ExperimentSpec spec;

  SyntheticBench() {
    bench::SyntheticConfig cfg;  // 20 images, 128x128, 6 classes
    bench::make_synthetic_dataset(dir / "data", cfg);
    spec.dataset = dir / "data";
    spec.budgets = {30};
    spec.seeds = {0, 1, 2, 3, 4};
    spec.lambda = 0.5;
    spec.random_ratio = 0.5;
    spec.timing = false;
    spec.jobs = 1;
  }
};

SyntheticBench& synthetic() {
  static SyntheticBench b;
  return b;
}

// 7. Dynamic sampling beats random on the synthetic set.
Outcome trend() {
  const auto t0 = Clock::now();
  auto spec = synthetic().spec;
  spec.strategies = {Strategy::Random, Strategy::Dynamic};
  const auto rows = bench::run_experiment(spec);
  std::map<Strategy, double> sum;
  for (const auto& r : rows) sum[r.strategy] += r.report.mIoU() * 100.0 / double(spec.seeds.size());
  const double t = seconds_since(t0);
  const double gain = sum[Strategy::Dynamic] - sum[Strategy::Random];
  return {gain >= kTrendMarginPts && t < kTrendBudgetS,
          "dynamic " + fmt("%.2f", sum[Strategy::Dynamic]) + " vs random " + fmt("%.2f", sum[Strategy::Random]) +
              " mIoU (" + fmt("%+.2f", gain) + "), " + fmt("%.1f s", t)};
}

// 8. Interior optima for lambda and the random ratio.
Outcome ablation_shape() {
  const auto& spec = synthetic().spec;
  const auto lam = bench::run_ablation(spec, bench::AblationParameter::Lambda, {0, 0.25, 0.5, 0.75, 1});
  const auto rat = bench::run_ablation(spec, bench::AblationParameter::RandomRatio, {0, 0.5, 1});
  const double inner = std::max({lam[1].mIoU, lam[2].mIoU, lam[3].mIoU});
  const double outer = std::max(lam[0].mIoU, lam[4].mIoU);
  const bool ok = inner >= outer && rat[1].mIoU >= rat[0].mIoU && rat[1].mIoU >= rat[2].mIoU;
  std::string detail = "lambda";
  for (const auto& r : lam) detail += fmt(" %.2f:", r.value) + fmt("%.2f", r.mIoU * 100);
  detail += "; ratio";
  for (const auto& r : rat) detail += fmt(" %.0f%%:", r.value * 100) + fmt("%.2f", r.mIoU * 100);
  return {ok, detail};
}

// 9. Identical invocations give identical bytes.
Outcome cli_determinism() {
  testing::TempDir t("acceptance-cli");
  const auto& s = t.path();
  std::vector<std::string> failed;
  int compared = 0;

  auto twice = [&](const std::string& name, std::vector<std::string> args, const std::vector<std::string>& files,
                   bool with_stdout = true) {
    std::vector<std::map<std::string, io::Bytes>> outs(2);
    std::vector<std::string> stdouts(2);
    for (int run = 0; run < 2; ++run) {
      const fs::path out = s / (name + "-" + std::to_string(run));
      fs::create_directories(out);
      std::vector<std::string> argv = args;
      for (auto& arg : argv) {
        if (arg.rfind("@out/", 0) == 0) arg = (out / arg.substr(5)).string();
      }
      const auto r = testing::run_cli(argv, s);
      if (r.exit_code != 0) {
        failed.push_back(name + " (exit " + std::to_string(r.exit_code) + ")");
        return;
      }
      stdouts[std::size_t(run)] = r.out;
      for (const auto& f : files) {
        if (fs::is_directory(out / f)) {
          for (const auto& e : fs::recursive_directory_iterator(out / f)) {
            if (e.is_regular_file()) outs[std::size_t(run)][fs::relative(e.path(), out).string()] = io::read_file(e.path());
          }
        } else {
          outs[std::size_t(run)][f] = fs::exists(out / f) ? io::read_file(out / f) : io::Bytes{};
        }
      }
    }
    ++compared;
    if (outs[0] != outs[1] || (with_stdout && stdouts[0] != stdouts[1])) failed.push_back(name);
  };

  bench::SyntheticConfig cfg;
  cfg.width = cfg.height = 96;
  auto [image, gt] = bench::synthesize_image(cfg, 4);
  io::write_rgb_png(s / "img.png", image);
  io::write_label_png(s / "gt.png", gt);
  io::write_file(s / "schema.json", io::format_schema_json(LabelSchema::with_default_names(6)));
  io::write_file(s / "pts.csv", io::format_points_csv(sample_points(
                                    SamplerConfig{}, image.dims(),
                                    std::make_shared<const ProposalSet>(generate_fallback_proposals(image)),
                                    [&](PixelCoord p) { return gt(p); })));
  const std::string img = (s / "img.png").string();

  twice("synth", {"synth", "--out", "@out/data", "--count", "4", "--width", "48", "--height", "48", "--seed", "9"},
        {"data"});
  for (const char* strategy : {"random", "grid", "centroid", "dynamic_only_a", "dynamic"}) {
    twice(std::string("sample-") + strategy,
          {"sample", "--image", img, "--strategy", strategy, "--fallback", "--gt", (s / "gt.png").string(), "--n",
           "25", "--seed", "11", "--out", "@out/points.csv"},
          {"points.csv"});
  }
  twice("proposals", {"proposals", "--image", img, "--out", "@out/m.json"}, {"m.json"});
  twice("augment",
        {"augment", "--image", img, "--points", (s / "pts.csv").string(), "--fallback", "--schema",
         (s / "schema.json").string(), "--out", "@out/seg.png", "--overlay", "@out/ov.png"},
        {"seg.png", "ov.png"});
  twice("evaluate",
        {"evaluate", "--pred", (s / "gt.png").string(), "--gt", (s / "gt.png").string(), "--schema",
         (s / "schema.json").string(), "--masked", "--format", "json", "--out", "@out/m.json"},
        {"m.json"});

  bench::SyntheticConfig small;
  small.count = 4;
  small.width = small.height = 48;
  bench::make_synthetic_dataset(s / "data", small);
  io::write_file(s / "exp.txt", std::string_view("dataset = data\nstrategies = random, grid, dynamic\nbudgets = 5, 10\n"
                                                 "seeds = 0, 1\ntiming = off\n"));
  twice("bench", {"bench", "--spec", (s / "exp.txt").string(), "--output-dir", "@out/res"}, {"res"});
  twice("bench-jobs", {"bench", "--spec", (s / "exp.txt").string(), "--jobs", "3", "--output-dir", "@out/res"},
        {"res"});
  twice("ablate", {"ablate", "--spec", (s / "exp.txt").string(), "--param", "random_ratio", "--output-dir", "@out/res"},
        {"res"});

  std::string detail = std::to_string(compared) + " subcommand configurations compared";
  for (const auto& f : failed) detail += "; differs: " + f;
  return {failed.empty() && compared > 0, detail};
}

// Every assignment id forms one 4-connected region.
bool connected_regions(const Grid<int>& a, int count) {
  const int h = int(a.rows()), w = int(a.cols());
  std::vector<int> components(std::size_t(count), 0);
  std::vector<char> seen(std::size_t(w * h), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (seen[std::size_t(y * w + x)]) continue;
      const int id = a(y, x);
      ++components[std::size_t(id)];
      std::queue<std::pair<int, int>> q;
      q.push({x, y});
      seen[std::size_t(y * w + x)] = 1;
      while (!q.empty()) {
        auto [cx, cy] = q.front();
        q.pop();
        const int nx[] = {cx + 1, cx - 1, cx, cx}, ny[] = {cy, cy, cy + 1, cy - 1};
        for (int k = 0; k < 4; ++k) {
          if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
          if (seen[std::size_t(ny[k] * w + nx[k])] || a(ny[k], nx[k]) != id) continue;
          seen[std::size_t(ny[k] * w + nx[k])] = 1;
          q.push({nx[k], ny[k]});
        }
      }
    }
  }
  return std::all_of(components.begin(), components.end(), [](int c) { return c == 1; });
}

// 10. SLIC partition properties.
Outcome slic_properties() {
  std::mt19937_64 gen(1010);
  int failures = 0, runs = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const ImageDims d(testing::uniform_int(gen, 1, 64), testing::uniform_int(gen, 1, 64));
    const RgbImage img = trial % 2 ? testing::random_image(d, gen) : testing::blocky_image(d, gen);
    SlicConfig cfg;
    cfg.superpixels = trial % 10 == 0 ? 1 : testing::uniform_int(gen, 1, 300);
    cfg.compactness = std::uniform_real_distribution<>(1, 40)(gen);
    const SuperpixelMap sp = slic_segment(img, cfg);
    ++runs;
    bool ok = sp.count >= 1 && sp.count <= cfg.superpixels && sp.assignment.minCoeff() >= 0 &&
              sp.assignment.maxCoeff() < sp.count && connected_regions(sp.assignment, sp.count);
    if (cfg.superpixels == 1) ok = ok && sp.count == 1 && (sp.assignment == 0).all();
    failures += !ok;
  }
  return {failures == 0, std::to_string(runs) + " fuzzed images, " + std::to_string(failures) + " violations"};
}

// 11. CLI augment on 512x512 with file-backed proposals.
Outcome augment_performance() {
  testing::TempDir t("acceptance-perf");
  bench::SyntheticConfig cfg;
  cfg.width = cfg.height = 512;
  auto [image, gt] = bench::synthesize_image(cfg, 0);
  // Fallback regions plus overlapping blobs, like a dense automatic proposal set.
  ProposalSet props = generate_fallback_proposals(image);
  std::mt19937_64 gen(1011);
  for (int i = 0; i < 40; ++i) {
    props.masks.push_back(make_candidate(int(props.masks.size()), testing::random_blob(image.dims(), gen), 0.8));
  }
  io::write_rgb_png(t / "img.png", image);
  io::write_file(t / "m.json", format_manifest(props));
  PointLabelSet pts;
  for (const auto& p : sample_points(SamplerConfig{}, image.dims(), std::make_shared<const ProposalSet>(props),
                                     [&](PixelCoord q) { return gt(q); })) {
    pts.add(p.point, p.label);
  }
  io::write_file(t / "p.csv", io::format_points_csv(pts));
  std::vector<double> times;
  int exit_code = 0;
  for (int run = 0; run < 3; ++run) {
    const auto t0 = Clock::now();
    const auto r = testing::run_cli({"augment", "--image", (t / "img.png").string(), "--points",
                                     (t / "p.csv").string(), "--proposals", (t / "m.json").string(), "--out",
                                     (t / "seg.png").string()},
                                    t.path());
    times.push_back(seconds_since(t0));
    exit_code |= r.exit_code;
  }
  std::sort(times.begin(), times.end());
  return {exit_code == 0 && times[1] < kAugmentBudgetS,
          std::to_string(pts.size()) + " points, " + std::to_string(props.masks.size()) + " masks, median " +
              fmt("%.3f s", times[1]) + " over 3 runs"};
}

// 12. Scripted HTTP session, export against CLI augment, undo snapshot.
Outcome service_flow() {
  testing::TempDir t("acceptance-http");
  testing::LiveServer server(t / "sessions");
  auto& c = server.client();
  bench::SyntheticConfig cfg;
  cfg.width = cfg.height = 96;
  auto [image, gt] = bench::synthesize_image(cfg, 6);
  const ProposalSet props = generate_fallback_proposals(image);

  testing::CreateRequest req;
  req.image_png = io::encode_rgb_png(image);
  req.schema = LabelSchema::with_default_names(6);
  req.budget = "12";
  req.proposals = format_manifest(props);
  req.config = {{"seed", 42}};
  const auto created = testing::create_session(c, req);
  if (!created || created->status != 201) return {false, "session create failed"};
  const std::string id = testing::body(created)["id"];

  std::string problems;
  std::shared_ptr<service::Session> session = server.store().get(id);
  std::map<std::string, io::Bytes> before_last;
  nlohmann::json last_pending;
  io::Bytes seg_before_last;
  for (int k = 0; k < 12; ++k) {
    const auto nxt = c.Get("/sessions/" + id + "/next-point");
    if (!nxt || nxt->status != 200) return {false, "next-point failed at step " + std::to_string(k)};
    const auto p = testing::body(nxt);
    if (k == 11) {
      before_last = session->persisted_state();
      last_pending = p;
      const auto seg = c.Get("/sessions/" + id + "/segmentation");
      seg_before_last = io::Bytes(seg->body.begin(), seg->body.end());
    }
    const PixelCoord q{p["x"], p["y"]};
    const auto sub = testing::submit(c, id, q.x, q.y, gt(q));
    if (!sub || sub->status != 200) return {false, "submit failed at step " + std::to_string(k)};
  }
  if (c.Get("/sessions/" + id + "/next-point")->status != 409) problems += "; budget not exhausted";

  const auto exp = c.Get("/sessions/" + id + "/export");
  if (!exp || exp->status != 200) return {false, "export failed"};
  std::map<std::string, io::Bytes> files;
  for (auto& e : io::read_tar(io::Bytes(exp->body.begin(), exp->body.end()))) files[e.name] = e.contents;
  io::write_file(t / "points.csv", files["points.csv"]);
  io::write_file(t / "proposals.json", files["proposals.json"]);
  io::write_rgb_png(t / "img.png", image);
  const auto cli = testing::run_cli({"augment", "--image", (t / "img.png").string(), "--points",
                                     (t / "points.csv").string(), "--proposals", (t / "proposals.json").string(),
                                     "--out", (t / "seg.png").string()},
                                    t.path());
  const bool same_png = cli.exit_code == 0 && io::read_file(t / "seg.png") == files["segmentation.png"];
  if (!same_png) problems += "; exported segmentation differs from CLI augment";
  const auto rows = io::parse_points_csv(std::string(files["points.csv"].begin(), files["points.csv"].end()));
  if (rows.size() != 12) problems += "; export has " + std::to_string(rows.size()) + " points";

  const auto undo = c.Post("/sessions/" + id + "/undo");
  if (!undo || undo->status != 200) return {false, "undo failed"};
  const auto after = c.Get("/sessions/" + id + "/segmentation");
  const bool undo_ok = session->persisted_state() == before_last &&
                       testing::body(c.Get("/sessions/" + id + "/next-point")) == last_pending &&
                       io::Bytes(after->body.begin(), after->body.end()) == seg_before_last;
  if (!undo_ok) problems += "; undo did not restore the previous snapshot";
  return {problems.empty(), "12-point session, export tar with " + std::to_string(files.size()) + " files" +
                                (problems.empty() ? ", export matches CLI, undo restores state" : problems)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"acquisition fields vs brute force", fields_oracle},
      {"hand-computed O and E", hand_values},
      {"incremental exploration field", incremental_exploration},
      {"overlap merge vs exhaustive oracle", merge_oracle},
      {"end-to-end map postconditions", end_to_end_postconditions},
      {"metrics", metrics},
      {"dynamic vs random trend", trend},
      {"lambda and ratio ablation shape", ablation_shape},
      {"CLI determinism", cli_determinism},
      {"SLIC properties", slic_properties},
      {"augment performance", augment_performance},
      {"service integration", service_flow},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %zu: %s (%s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
