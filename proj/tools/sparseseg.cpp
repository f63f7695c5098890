// sparseseg: batch command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
// Machine-readable output goes to stdout (or --out); diagnostics to stderr.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sparseseg/augment.hpp"
#include "sparseseg/bench.hpp"
#include "sparseseg/io.hpp"
#include "sparseseg/metrics.hpp"
#include "sparseseg/proposals.hpp"
#include "sparseseg/sampler.hpp"
#include "sparseseg/service.hpp"
#include "sparseseg/superpixels.hpp"

namespace fs = std::filesystem;
using namespace sparseseg;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void emit(const std::optional<fs::path>& out, std::string_view text) {
  if (out) {
    io::write_file(*out, text);
  } else {
    std::cout << text << std::flush;
  }
}

struct ProposalFlags {
  std::optional<fs::path> manifest;
  bool fallback = false;
  int fallback_superpixels = 64;
  double merge_threshold = 10.0;

  void add(CLI::App* cmd) {
    auto* file = cmd->add_option("--proposals", manifest, "Proposal manifest (JSON)");
    auto* fb = cmd->add_flag("--fallback", fallback, "Generate proposals from the image (SLIC + merging)");
    file->excludes(fb);
    cmd->add_option("--fallback-superpixels", fallback_superpixels, "Superpixels for fallback proposals")
        ->capture_default_str();
    cmd->add_option("--merge-threshold", merge_threshold, "Mean-Lab merge threshold for fallback proposals")
        ->capture_default_str();
  }

  bool given() const { return manifest || fallback; }

  std::unique_ptr<ProposalProvider> provider(const RgbImage& image) const {
    if (manifest) return std::make_unique<FileProposalProvider>(FileProposalProvider::load(*manifest, image.dims()));
    FallbackConfig cfg;
    cfg.superpixels = fallback_superpixels;
    cfg.merge_threshold = merge_threshold;
    return std::make_unique<FallbackProposalProvider>(image, cfg);
  }
};

struct SlicFlags {
  SlicConfig cfg;
  void add(CLI::App* cmd) {
    cmd->add_option("--superpixels", cfg.superpixels, "SLIC superpixel count for label propagation")
        ->capture_default_str();
    cmd->add_option("--compactness", cfg.compactness, "SLIC compactness")->capture_default_str();
  }
};

// ----------------------------------------------------------------------------

struct SampleArgs {
  fs::path image;
  std::string strategy = "dynamic";
  int n = 30;
  std::uint64_t seed = 0;
  double lambda = 0.5;
  double random_ratio = 0.5;
  ProposalFlags proposals;
  std::optional<fs::path> gt;
  std::optional<fs::path> out;
};

void run_sample(const SampleArgs& a) {
  const auto strategy = parse_strategy(a.strategy);
  if (!strategy) throw UsageError("unknown strategy " + a.strategy);
  if (needs_proposals(*strategy) && !a.proposals.given()) {
    throw UsageError("strategy " + a.strategy + " needs --proposals or --fallback");
  }
  const RgbImage image = io::read_rgb_png(a.image);
  std::shared_ptr<const ProposalSet> proposals;
  if (a.proposals.given()) proposals = std::make_shared<const ProposalSet>(a.proposals.provider(image)->proposals());
  std::optional<LabelMap> gt;
  if (a.gt) {
    gt = io::read_label_png(*a.gt);
    if (gt->dims() != image.dims()) throw Error(ErrorKind::DimsMismatch, "ground truth dims differ from image");
  }
  const SamplerConfig config{a.lambda, a.random_ratio, a.n, a.seed, *strategy};
  const Annotator annotator = [&](PixelCoord p) -> ClassId { return gt ? (*gt)(p) : kUnlabeled; };
  emit(a.out, io::format_points_csv(sample_points(config, image.dims(), proposals, annotator)));
}

struct AugmentArgs {
  fs::path image;
  fs::path points;
  ProposalFlags proposals;
  SlicFlags slic;
  std::optional<fs::path> schema;
  fs::path out;
  std::optional<fs::path> overlay;
  double opacity = 0.5;
};

void run_augment(const AugmentArgs& a) {
  if (!a.proposals.given()) throw UsageError("augment needs --proposals or --fallback");
  const RgbImage image = io::read_rgb_png(a.image);
  const std::optional<LabelSchema> schema =
      a.schema ? std::optional<LabelSchema>(io::read_schema(*a.schema)) : std::nullopt;
  const PointLabelSet points =
      io::to_point_set(io::read_points_csv(a.points), image.dims(), schema ? schema->class_count() : 255);
  if (points.empty()) throw Error(ErrorKind::EmptyPointSet, "points CSV has no labeled rows");
  const auto provider = a.proposals.provider(image);
  const LabelMap labels = augment(image, points, *provider, a.slic.cfg);
  io::write_label_png(a.out, labels);
  if (a.overlay) {
    int max_label = 0;
    for (const PointLabel& p : points) max_label = std::max(max_label, int(p.label));
    const LabelSchema colors = schema ? *schema : LabelSchema::with_default_names(max_label + 1);
    io::write_rgb_png(*a.overlay, io::overlay(image, labels, colors, a.opacity));
  }
}

struct EvaluateArgs {
  fs::path pred;
  fs::path gt;
  fs::path schema;
  bool masked = false;
  std::string format = "csv";
  std::optional<fs::path> out;
};

void run_evaluate(const EvaluateArgs& a) {
  const LabelSchema schema = io::read_schema(a.schema);
  ConfusionMatrix cm(schema.class_count());
  if (fs::is_directory(a.gt)) {
    if (!fs::is_directory(a.pred)) throw UsageError("--gt is a directory, so --pred must be one too");
    std::vector<fs::path> names;
    for (const auto& e : fs::directory_iterator(a.gt)) {
      if (e.path().extension() == ".png") names.push_back(e.path().filename());
    }
    std::sort(names.begin(), names.end());
    if (names.empty()) throw Error(ErrorKind::DatasetInvalid, "no PNG masks in " + a.gt.string());
    for (const fs::path& name : names) {
      if (!fs::exists(a.pred / name)) throw Error(ErrorKind::DatasetInvalid, "missing prediction " + name.string());
      cm.accumulate(io::read_label_png(a.gt / name), io::read_label_png(a.pred / name));
    }
  } else {
    cm.accumulate(io::read_label_png(a.gt), io::read_label_png(a.pred));
  }
  const MetricReport report = make_report(cm, schema);
  if (a.format == "json") {
    emit(a.out, format_metrics_json(report, schema, cm.ignored_pixels()));
  } else {
    emit(a.out, format_metrics_csv(report, schema, a.masked, cm.ignored_pixels()));
  }
}

struct BenchArgs {
  fs::path spec;
  std::optional<int> jobs;
  bool no_timing = false;
  std::optional<fs::path> output_dir;
  std::optional<fs::path> out;
};

bench::ExperimentSpec load_spec(const BenchArgs& a) {
  bench::ExperimentSpec spec = bench::load_experiment_spec(a.spec);
  if (a.jobs) spec.jobs = *a.jobs;
  if (a.no_timing) spec.timing = false;
  if (a.output_dir) spec.output = *a.output_dir;
  return spec;
}

void run_bench(const BenchArgs& a) { emit(a.out, bench::format_results_csv(bench::run_experiment(load_spec(a)))); }

struct AblateArgs {
  BenchArgs bench;
  std::string param;
  std::vector<double> values;
};

void run_ablate(const AblateArgs& a) {
  bench::AblationParameter param;
  if (a.param == "lambda") {
    param = bench::AblationParameter::Lambda;
  } else if (a.param == "random_ratio" || a.param == "ratio") {
    param = bench::AblationParameter::RandomRatio;
  } else {
    throw UsageError("--param is lambda|random_ratio");
  }
  const auto values = a.values.empty() ? bench::default_ablation_values(param) : a.values;
  emit(a.bench.out, bench::format_ablation_csv(param, bench::run_ablation(load_spec(a.bench), param, values)));
}

struct SynthArgs {
  fs::path out;
  bench::SyntheticConfig cfg;
};

void run_synth(const SynthArgs& a) {
  const bench::Dataset ds = bench::make_synthetic_dataset(a.out, a.cfg);
  std::cerr << "wrote " << ds.names.size() << " image/mask pairs to " << a.out << "\n";
}

struct ProposalsArgs {
  fs::path image;
  FallbackConfig cfg;
  std::optional<fs::path> out;
};

void run_proposals(const ProposalsArgs& a) {
  emit(a.out, format_manifest(generate_fallback_proposals(io::read_rgb_png(a.image), a.cfg)));
}

struct ServeArgs {
  std::optional<fs::path> config;
  std::optional<std::string> host;
  std::optional<int> port;
  std::optional<fs::path> data_dir;
};

service::Server* g_server = nullptr;

void run_serve(const ServeArgs& a) {
  service::ServiceConfig cfg = service::load_service_config(a.config);
  if (a.host) cfg.host = *a.host;
  if (a.port) cfg.port = *a.port;
  if (a.data_dir) cfg.data_dir = *a.data_dir;
  service::Server server(cfg);
  const int port = server.bind();
  g_server = &server;
  std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
  std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
  std::cerr << "listening on " << cfg.host << ":" << port << " (data " << cfg.data_dir << ")" << std::endl;
  server.serve();
  g_server = nullptr;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse point-label annotation engine"};
  app.require_subcommand(1);
  app.set_version_flag("--version", service::kEngineVersion);

  SampleArgs sample;
  auto* cmd_sample = app.add_subcommand("sample", "Choose points to label; oracle labels with --gt");
  cmd_sample->add_option("--image", sample.image, "RGB PNG")->required()->check(CLI::ExistingFile);
  cmd_sample->add_option("--strategy", sample.strategy, "random|grid|centroid|dynamic_only_a|dynamic")
      ->capture_default_str();
  cmd_sample->add_option("--n", sample.n, "Point budget")->capture_default_str();
  cmd_sample->add_option("--seed", sample.seed, "Random seed")->capture_default_str();
  cmd_sample->add_option("--lambda", sample.lambda, "Object-proximity weight")->capture_default_str();
  cmd_sample->add_option("--random-ratio", sample.random_ratio, "Share of background points")->capture_default_str();
  sample.proposals.add(cmd_sample);
  cmd_sample->add_option("--gt", sample.gt, "Dense ground truth answering label queries");
  cmd_sample->add_option("--out", sample.out, "Points CSV (default stdout)");

  AugmentArgs aug;
  auto* cmd_augment = app.add_subcommand("augment", "Dense segmentation from point labels");
  cmd_augment->add_option("--image", aug.image, "RGB PNG")->required()->check(CLI::ExistingFile);
  cmd_augment->add_option("--points", aug.points, "Points CSV")->required()->check(CLI::ExistingFile);
  aug.proposals.add(cmd_augment);
  aug.slic.add(cmd_augment);
  cmd_augment->add_option("--schema", aug.schema, "Label schema JSON (validates labels, colours overlay)");
  cmd_augment->add_option("--out", aug.out, "Indexed label PNG")->required();
  cmd_augment->add_option("--overlay", aug.overlay, "Overlay PNG");
  cmd_augment->add_option("--opacity", aug.opacity, "Overlay opacity")->capture_default_str();

  EvaluateArgs eval;
  auto* cmd_eval = app.add_subcommand("evaluate", "mPA / mIoU of predictions against ground truth");
  cmd_eval->add_option("--pred", eval.pred, "Prediction PNG or directory")->required();
  cmd_eval->add_option("--gt", eval.gt, "Ground-truth PNG or directory")->required();
  cmd_eval->add_option("--schema", eval.schema, "Label schema JSON")->required()->check(CLI::ExistingFile);
  cmd_eval->add_flag("--masked", eval.masked, "Per-class table without ground-truth background");
  cmd_eval->add_option("--format", eval.format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
  cmd_eval->add_option("--out", eval.out, "Output file (default stdout)");

  auto add_bench_flags = [](CLI::App* cmd, BenchArgs& b) {
    cmd->add_option("--spec", b.spec, "Experiment spec (key = value)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--jobs", b.jobs, "Worker threads");
    cmd->add_flag("--no-timing", b.no_timing, "Write zero timings for byte-stable output");
    cmd->add_option("--output-dir", b.output_dir, "Directory for result files");
    cmd->add_option("--out", b.out, "Table file (default stdout)");
  };
  BenchArgs bench_args;
  auto* cmd_bench = app.add_subcommand("bench", "Run a simulated-annotator experiment grid");
  add_bench_flags(cmd_bench, bench_args);

  AblateArgs ablate;
  auto* cmd_ablate = app.add_subcommand("ablate", "Sweep lambda or the random ratio for the dynamic strategy");
  add_bench_flags(cmd_ablate, ablate.bench);
  cmd_ablate->add_option("--param", ablate.param, "lambda|random_ratio")->required();
  cmd_ablate->add_option("--values", ablate.values, "Values to sweep (default 0,0.25,0.5,0.75,1)")->delimiter(',');

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth", "Write a synthetic dataset");
  cmd_synth->add_option("--out", synth.out, "Dataset directory")->required();
  cmd_synth->add_option("--count", synth.cfg.count, "Image count")->capture_default_str();
  cmd_synth->add_option("--width", synth.cfg.width)->capture_default_str();
  cmd_synth->add_option("--height", synth.cfg.height)->capture_default_str();
  cmd_synth->add_option("--classes", synth.cfg.classes, "Classes including background")->capture_default_str();
  cmd_synth->add_option("--seed", synth.cfg.seed)->capture_default_str();

  ProposalsArgs props;
  auto* cmd_props = app.add_subcommand("proposals", "Export fallback proposals as a manifest");
  cmd_props->add_option("--image", props.image, "RGB PNG")->required()->check(CLI::ExistingFile);
  cmd_props->add_option("--superpixels", props.cfg.superpixels)->capture_default_str();
  cmd_props->add_option("--merge-threshold", props.cfg.merge_threshold)->capture_default_str();
  cmd_props->add_option("--out", props.out, "Manifest file (default stdout)");

  ServeArgs serve;
  auto* cmd_serve = app.add_subcommand("serve", "Run the HTTP annotation service");
  cmd_serve->add_option("--config", serve.config, "Service config JSON")->check(CLI::ExistingFile);
  cmd_serve->add_option("--host", serve.host);
  cmd_serve->add_option("--port", serve.port);
  cmd_serve->add_option("--data-dir", serve.data_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*cmd_sample) run_sample(sample);
    if (*cmd_augment) run_augment(aug);
    if (*cmd_eval) run_evaluate(eval);
    if (*cmd_bench) run_bench(bench_args);
    if (*cmd_ablate) run_ablate(ablate);
    if (*cmd_synth) run_synth(synth);
    if (*cmd_props) run_proposals(props);
    if (*cmd_serve) run_serve(serve);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
