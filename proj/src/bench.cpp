#include "sparseseg/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "sparseseg/augment.hpp"
#include "sparseseg/io.hpp"

namespace sparseseg::bench {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void invalid(const std::string& message) { throw Error(ErrorKind::DatasetInvalid, message); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Rgb class_base_color(int c) {
  static constexpr std::array<Rgb, 6> kColors = {{
      {38, 92, 118}, {214, 96, 77}, {232, 200, 90}, {96, 170, 84}, {150, 96, 170}, {236, 236, 226},
  }};
  return c < int(kColors.size()) ? kColors[std::size_t(c)] : default_class_color(c);
}

std::uint8_t clamp_byte(double v) { return std::uint8_t(std::clamp(std::lround(v), 0l, 255l)); }

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

// One sampler configuration evaluated over the whole dataset.
struct RunKey {
  SamplerConfig config;  // seed is the experiment seed; per-image seeds derive from it
};

struct RunResult {
  ConfusionMatrix cm;
  std::vector<double> seconds;  // per image, dataset order
};

std::vector<RunResult> evaluate_runs(const Dataset& dataset, const ExperimentSpec& spec,
                                     const std::vector<RunKey>& runs) {
  const std::size_t n_images = dataset.names.size();
  const int m = dataset.schema.class_count();
  // per_image[i][r]
  std::vector<std::vector<ConfusionMatrix>> per_image(n_images);
  std::vector<std::vector<double>> per_image_time(n_images, std::vector<double>(runs.size(), 0.0));

  auto process = [&](std::size_t i) {
    const RgbImage image = io::read_rgb_png(dataset.image_path(i));
    const LabelMap gt = io::read_label_png(dataset.mask_path(i));
    std::unique_ptr<ProposalProvider> provider;
    if (spec.proposal_dir) {
      provider = std::make_unique<FileProposalProvider>(
          FileProposalProvider::load(*spec.proposal_dir / (dataset.names[i] + ".json"), image.dims()));
    } else {
      provider = std::make_unique<FallbackProposalProvider>(image, spec.fallback);
    }
    auto proposals = std::make_shared<const ProposalSet>(provider->proposals());
    const SuperpixelMap sp = slic_segment(image, spec.superpixels);
    const SimulatedAnnotator annotator{&gt, dataset.schema.background_id};
    std::vector<ConfusionMatrix> matrices;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      SamplerConfig config = runs[r].config;
      config.seed = image_seed(config.seed, i);
      const auto start = std::chrono::steady_clock::now();
      const PointLabelSet points = sample_points(config, image.dims(), proposals, annotator);
      const LabelMap pred = augment(sp, points, *provider);
      const auto stop = std::chrono::steady_clock::now();
      per_image_time[i][r] = std::chrono::duration<double>(stop - start).count();
      ConfusionMatrix cm(m);
      cm.accumulate(gt, pred);
      matrices.push_back(std::move(cm));
    }
    per_image[i] = std::move(matrices);
  };

  const int jobs = std::max(1, spec.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < n_images; ++i) process(i);
  } else {
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t i = std::size_t(w); i < n_images; i += std::size_t(jobs)) process(i);
        } catch (...) {
          errors[std::size_t(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<RunResult> out;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    RunResult result{ConfusionMatrix(m), {}};
    for (std::size_t i = 0; i < n_images; ++i) {
      result.cm += per_image[i][r];
      result.seconds.push_back(spec.timing ? per_image_time[i][r] : 0.0);
    }
    out.push_back(std::move(result));
  }
  return out;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / double(v.size()))};
}

void write_metadata(const fs::path& dir, const ExperimentSpec& spec, const Dataset& dataset) {
  nlohmann::json meta = {
      {"dataset", spec.dataset.string()},
      {"images", dataset.names.size()},
      {"lambda", spec.lambda},
      {"random_ratio", spec.random_ratio},
      {"proposals", spec.proposal_dir ? "file" : "fallback"},
      {"rng", std::string(Rng::kAlgorithm)},
      {"image_seed", "splitmix64(seed ^ splitmix64(image_index))"},
      {"superpixels", {{"K", spec.superpixels.superpixels},
                       {"compactness", spec.superpixels.compactness},
                       {"iterations", spec.superpixels.iterations}}},
      {"timing", spec.timing},
  };
  io::write_file(dir / "metadata.json", meta.dump(2) + "\n");
}

}  // namespace

std::uint64_t image_seed(std::uint64_t seed, std::size_t image_index) {
  return splitmix64(seed ^ splitmix64(std::uint64_t(image_index)));
}

ClassId SimulatedAnnotator::operator()(PixelCoord p) const {
  const ClassId label = (*gt)(p);
  return label == kUnlabeled ? background_id : label;
}

ClassId oracle_query(const SimulatedAnnotator& annotator, PixelCoord p) { return annotator(p); }

Dataset open_dataset(const fs::path& root) {
  Dataset ds;
  ds.root = root;
  if (!fs::exists(root / "schema.json")) invalid("missing " + (root / "schema.json").string());
  try {
    ds.schema = io::read_schema(root / "schema.json");
  } catch (const Error& e) {
    invalid(e.what());
  }
  if (!fs::is_directory(root / "images") || !fs::is_directory(root / "masks")) {
    invalid("dataset needs images/ and masks/ under " + root.string());
  }
  for (const auto& entry : fs::directory_iterator(root / "images")) {
    if (entry.path().extension() == ".png") ds.names.push_back(entry.path().stem().string());
  }
  std::sort(ds.names.begin(), ds.names.end());
  if (ds.names.empty()) invalid("no images in " + (root / "images").string());
  for (std::size_t i = 0; i < ds.names.size(); ++i) {
    if (!fs::exists(ds.mask_path(i))) invalid("no mask for image " + ds.names[i]);
  }
  return ds;
}

std::pair<RgbImage, LabelMap> synthesize_image(const SyntheticConfig& config, int index) {
  const ImageDims dims(config.width, config.height);
  Rng rng(splitmix64(config.seed) ^ splitmix64(std::uint64_t(index) + 1));
  RgbImage image(dims);
  LabelMap gt(dims, 0);

  // Background: base colour, a linear gradient, a soft ripple and pixel noise.
  const Rgb base = class_base_color(0);
  const double gx = rng.uniform(-12, 12), gy = rng.uniform(-12, 12);
  const double ripple_f = rng.uniform(0.08, 0.2), ripple_phase = rng.uniform(0, 2 * std::numbers::pi);
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      const double t = gx * (x / double(dims.width) - 0.5) + gy * (y / double(dims.height) - 0.5) +
                       3.0 * std::sin(ripple_f * (x + 0.7 * y) + ripple_phase);
      Rgb c;
      for (int k = 0; k < 3; ++k) c[std::size_t(k)] = clamp_byte(base[std::size_t(k)] + t + rng.uniform(-5, 5));
      image.set(x, y, c);
    }
  }

  const int fg_classes = config.classes - 1;
  const int blobs = 3 + int(rng.uniform_index(4));
  const double scale = std::min(dims.width, dims.height) / 128.0;
  for (int j = 0; j < blobs; ++j) {
    const int cls = j == 0 ? 1 + index % fg_classes : 1 + int(rng.uniform_index(std::uint64_t(fg_classes)));
    const double cx = rng.uniform(0.1, 0.9) * dims.width, cy = rng.uniform(0.1, 0.9) * dims.height;
    const double r = rng.uniform(7, 24) * scale;
    const bool ellipse = rng.uniform01() < 0.5;
    const double aspect = rng.uniform(0.55, 1.0), angle = rng.uniform(0, std::numbers::pi);
    std::vector<double> radii;
    if (!ellipse) {
      const int vertices = 5 + int(rng.uniform_index(4));
      for (int v = 0; v < vertices; ++v) radii.push_back(r * rng.uniform(0.6, 1.15));
    }
    Rgb color = class_base_color(cls);
    for (auto& ch : color) ch = clamp_byte(ch + rng.uniform(-12, 12));
    auto inside = [&](double px, double py) {
      const double dx = px - cx, dy = py - cy;
      if (ellipse) {
        const double u = dx * std::cos(angle) + dy * std::sin(angle);
        const double v = -dx * std::sin(angle) + dy * std::cos(angle);
        return (u * u) / (r * r) + (v * v) / (r * r * aspect * aspect) <= 1.0;
      }
      // Star-shaped polygon with linearly interpolated vertex radii.
      const double theta = std::atan2(dy, dx) + std::numbers::pi;
      const double step = 2 * std::numbers::pi / double(radii.size());
      const auto k = std::size_t(theta / step) % radii.size();
      const double f = theta / step - std::floor(theta / step);
      const double edge = radii[k] * (1 - f) + radii[(k + 1) % radii.size()] * f;
      return std::sqrt(dx * dx + dy * dy) <= edge;
    };
    const int x0 = std::max(0, int(cx - 1.2 * r)), x1 = std::min(dims.width - 1, int(cx + 1.2 * r));
    const int y0 = std::max(0, int(cy - 1.2 * r)), y1 = std::min(dims.height - 1, int(cy + 1.2 * r));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (!inside(x, y)) continue;
        gt({x, y}) = ClassId(cls);
        Rgb c;
        for (int k = 0; k < 3; ++k) c[std::size_t(k)] = clamp_byte(color[std::size_t(k)] + rng.uniform(-6, 6));
        image.set(x, y, c);
      }
    }
  }
  return {std::move(image), std::move(gt)};
}

Dataset make_synthetic_dataset(const fs::path& out, const SyntheticConfig& config) {
  if (config.classes < 2) throw Error(ErrorKind::InvalidArgument, "synthetic data needs >= 2 classes");
  if (config.count < 1) throw Error(ErrorKind::InvalidArgument, "synthetic data needs count >= 1");
  std::error_code ec;
  fs::create_directories(out / "images", ec);
  fs::create_directories(out / "masks", ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + out.string() + ": " + ec.message());

  LabelSchema schema;
  for (int c = 0; c < config.classes; ++c) {
    schema.names.push_back(c == 0 ? "background" : "class_" + std::to_string(c));
    schema.colors.push_back(class_base_color(c));
  }
  schema.background_id = 0;
  io::write_file(out / "schema.json", io::format_schema_json(schema));
  const int width = std::max(2, int(std::to_string(config.count - 1).size()));
  for (int i = 0; i < config.count; ++i) {
    auto [image, gt] = synthesize_image(config, i);
    std::string name = std::to_string(i);
    name = "synth_" + std::string(std::size_t(width) - name.size(), '0') + name;
    io::write_rgb_png(out / "images" / (name + ".png"), image);
    io::write_label_png(out / "masks" / (name + ".png"), gt);
  }
  return open_dataset(out);
}

ExperimentSpec parse_experiment_spec(const std::string& text, const fs::path& base_dir) {
  ExperimentSpec spec;
  auto resolve = [&](const std::string& v) {
    const fs::path p(v);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool have_dataset = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const std::string where = "experiment spec line " + std::to_string(line_no);
    if (eq == std::string::npos) throw Error(ErrorKind::InvalidArgument, where + ": expected key = value");
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    try {
      if (key == "dataset") {
        spec.dataset = resolve(value);
        have_dataset = true;
      } else if (key == "strategies") {
        spec.strategies.clear();
        for (const auto& s : split_list(value)) {
          const auto strategy = parse_strategy(s);
          if (!strategy) throw Error(ErrorKind::InvalidArgument, where + ": unknown strategy " + s);
          spec.strategies.push_back(*strategy);
        }
      } else if (key == "budgets") {
        spec.budgets.clear();
        for (const auto& s : split_list(value)) spec.budgets.push_back(std::stoi(s));
      } else if (key == "seeds") {
        spec.seeds.clear();
        for (const auto& s : split_list(value)) spec.seeds.push_back(std::stoull(s));
      } else if (key == "lambda") {
        spec.lambda = std::stod(value);
      } else if (key == "random_ratio") {
        spec.random_ratio = std::stod(value);
      } else if (key == "proposals") {
        if (value == "fallback") {
          spec.proposal_dir.reset();
        } else {
          spec.proposal_dir = resolve(value);
        }
      } else if (key == "output") {
        spec.output = resolve(value);
      } else if (key == "jobs") {
        spec.jobs = std::stoi(value);
      } else if (key == "timing") {
        if (value != "on" && value != "off") throw Error(ErrorKind::InvalidArgument, where + ": timing is on|off");
        spec.timing = value == "on";
      } else if (key == "superpixels") {
        spec.superpixels.superpixels = std::stoi(value);
      } else if (key == "compactness") {
        spec.superpixels.compactness = std::stod(value);
      } else if (key == "slic_iterations") {
        spec.superpixels.iterations = std::stoi(value);
      } else if (key == "fallback_superpixels") {
        spec.fallback.superpixels = std::stoi(value);
      } else if (key == "fallback_merge_threshold") {
        spec.fallback.merge_threshold = std::stod(value);
      } else if (key == "fallback_min_area") {
        spec.fallback.min_area = std::stoul(value);
      } else {
        throw Error(ErrorKind::InvalidArgument, where + ": unknown key " + key);
      }
    } catch (const std::logic_error& e) {  // stoi and friends
      throw Error(ErrorKind::InvalidArgument, where + ": bad value for " + key);
    }
  }
  if (!have_dataset) throw Error(ErrorKind::InvalidArgument, "experiment spec needs a dataset");
  if (spec.strategies.empty() || spec.budgets.empty() || spec.seeds.empty()) {
    throw Error(ErrorKind::InvalidArgument, "strategies, budgets and seeds must be non-empty");
  }
  return spec;
}

ExperimentSpec load_experiment_spec(const fs::path& path) {
  const io::Bytes bytes = io::read_file(path);
  return parse_experiment_spec(std::string(bytes.begin(), bytes.end()), path.parent_path());
}

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec) {
  const Dataset dataset = open_dataset(spec.dataset);
  std::vector<RunKey> runs;
  for (Strategy s : spec.strategies) {
    std::vector<int> budgets = spec.budgets;
    std::sort(budgets.begin(), budgets.end());
    std::vector<std::uint64_t> seeds = spec.seeds;
    std::sort(seeds.begin(), seeds.end());
    for (int n : budgets) {
      for (std::uint64_t seed : seeds) {
        SamplerConfig c{spec.lambda, spec.random_ratio, n, seed, s};
        c.validate();
        runs.push_back({c});
      }
    }
  }
  const std::vector<RunResult> results = evaluate_runs(dataset, spec, runs);
  std::vector<ResultRow> rows;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto [mean, std] = mean_std(results[r].seconds);
    const SamplerConfig& c = runs[r].config;
    rows.push_back({c.strategy, c.budget, c.seed, c.lambda, c.random_ratio,
                    make_report(results[r].cm, dataset.schema), mean, std});
  }
  if (spec.output) {
    fs::create_directories(*spec.output);
    io::write_file(*spec.output / "results.csv", format_results_csv(rows));
    write_metadata(*spec.output, spec, dataset);
  }
  return rows;
}

std::string format_results_csv(const std::vector<ResultRow>& rows) {
  std::string out = std::string(kResultsHeader) + "\n";
  for (const ResultRow& r : rows) {
    out += std::string(to_string(r.strategy)) + "," + std::to_string(r.budget) + "," +
           std::to_string(r.seed) + "," + fmt6(r.report.mPA()) + "," + fmt6(r.report.mIoU()) + "," +
           fmt6(r.report.masked_mPA()) + "," + fmt6(r.report.masked_mIoU()) + "," +
           fmt6(r.time_mean_s) + "," + fmt6(r.time_std_s) + "\n";
  }
  return out;
}

std::vector<double> default_ablation_values(AblationParameter parameter) {
  (void)parameter;
  return {0.0, 0.25, 0.5, 0.75, 1.0};
}

std::vector<AblationRow> run_ablation(const ExperimentSpec& spec, AblationParameter parameter,
                                      const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorKind::InvalidArgument, "ablation needs at least one value");
  const Dataset dataset = open_dataset(spec.dataset);
  std::vector<RunKey> runs;
  for (double v : values) {
    for (std::uint64_t seed : spec.seeds) {
      SamplerConfig c{spec.lambda, spec.random_ratio, spec.budgets.front(), seed, Strategy::Dynamic};
      (parameter == AblationParameter::Lambda ? c.lambda : c.random_ratio) = v;
      c.validate();
      runs.push_back({c});
    }
  }
  const std::vector<RunResult> results = evaluate_runs(dataset, spec, runs);
  std::vector<AblationRow> rows;
  const std::size_t per_value = spec.seeds.size();
  for (std::size_t v = 0; v < values.size(); ++v) {
    AblationRow row{values[v], 0, 0, 0, 0};
    for (std::size_t s = 0; s < per_value; ++s) {
      const MetricReport report = make_report(results[v * per_value + s].cm, dataset.schema);
      row.mPA += report.mPA() / double(per_value);
      row.mIoU += report.mIoU() / double(per_value);
      row.masked_mPA += report.masked_mPA() / double(per_value);
      row.masked_mIoU += report.masked_mIoU() / double(per_value);
    }
    rows.push_back(row);
  }
  if (spec.output) {
    fs::create_directories(*spec.output);
    io::write_file(*spec.output / (parameter == AblationParameter::Lambda ? "ablation_lambda.csv"
                                                                       : "ablation_random_ratio.csv"),
                   format_ablation_csv(parameter, rows));
  }
  return rows;
}

std::string format_ablation_csv(AblationParameter parameter, const std::vector<AblationRow>& rows) {
  std::string out = parameter == AblationParameter::Lambda ? "lambda" : "random_ratio_pct";
  out += ",mPA,mIoU,masked_mPA,masked_mIoU\n";
  for (const AblationRow& r : rows) {
    char value[32];
    if (parameter == AblationParameter::Lambda) {
      std::snprintf(value, sizeof value, "%.2f", r.value);
    } else {
      std::snprintf(value, sizeof value, "%g", r.value * 100.0);
    }
    out += std::string(value) + "," + fmt6(r.mPA) + "," + fmt6(r.mIoU) + "," + fmt6(r.masked_mPA) +
           "," + fmt6(r.masked_mIoU) + "\n";
  }
  return out;
}

}  // namespace sparseseg::bench
