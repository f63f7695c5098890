#pragma once

// Simulated-annotator experiments over densely labeled datasets.
//
// Dataset layout:
//   <root>/schema.json
//   <root>/images/<name>.png   RGB
//   <root>/masks/<name>.png    class ids, 255 = unlabeled

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sparseseg/metrics.hpp"
#include "sparseseg/proposals.hpp"
#include "sparseseg/raster.hpp"
#include "sparseseg/sampler.hpp"
#include "sparseseg/superpixels.hpp"

namespace sparseseg::bench {

struct Dataset {
  std::filesystem::path root;
  LabelSchema schema;
  std::vector<std::string> names;  // basenames without extension, sorted

  std::filesystem::path image_path(std::size_t i) const { return root / "images" / (names[i] + ".png"); }
  std::filesystem::path mask_path(std::size_t i) const { return root / "masks" / (names[i] + ".png"); }
};

// Throws DatasetInvalid for a missing schema, unpaired files, mismatched dims
// or mask values outside the schema.
Dataset open_dataset(const std::filesystem::path& root);

struct SimulatedAnnotator {
  const LabelMap* gt;
  ClassId background_id;

  // Ground-truth lookup; unlabeled ground truth answers background.
  ClassId operator()(PixelCoord p) const;
};

ClassId oracle_query(const SimulatedAnnotator& annotator, PixelCoord p);

struct SyntheticConfig {
  int count = 20;
  int width = 128;
  int height = 128;
  int classes = 6;  // including background (id 0)
  std::uint64_t seed = 0;
};

// Textured background with coloured elliptical and polygonal blobs.
// Throws InvalidArgument for fewer than two classes, IoError on write failure.
Dataset make_synthetic_dataset(const std::filesystem::path& out, const SyntheticConfig& config);

// One synthetic image/mask pair, for tests.
std::pair<RgbImage, LabelMap> synthesize_image(const SyntheticConfig& config, int index);

struct ExperimentSpec {
  std::filesystem::path dataset;
  std::vector<Strategy> strategies{Strategy::Random, Strategy::Dynamic};
  std::vector<int> budgets{30};
  std::vector<std::uint64_t> seeds{0};
  double lambda = 0.5;
  double random_ratio = 0.5;
  std::optional<std::filesystem::path> proposal_dir;  // nullopt = fallback generator
  FallbackConfig fallback;
  SlicConfig superpixels;
  std::optional<std::filesystem::path> output;
  int jobs = 1;
  bool timing = true;
};

// "key = value" lines; '#' starts a comment. Relative paths resolve against
// `base_dir`. Throws InvalidArgument naming the offending line.
ExperimentSpec parse_experiment_spec(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);

struct ResultRow {
  Strategy strategy;
  int budget;
  std::uint64_t seed;
  double lambda;
  double random_ratio;
  MetricReport report;
  double time_mean_s = 0.0;
  double time_std_s = 0.0;
};

inline constexpr const char* kResultsHeader =
    "strategy,n,seed,mPA,mIoU,masked_mPA,masked_mIoU,time_mean_s,time_std_s";

// Rows ordered by (strategy as listed, n, seed). Writes results.csv and
// metadata.json into spec.output when set.
std::vector<ResultRow> run_experiment(const ExperimentSpec& spec);
std::string format_results_csv(const std::vector<ResultRow>& rows);

enum class AblationParameter { Lambda, RandomRatio };

struct AblationRow {
  double value;
  double mPA, mIoU, masked_mPA, masked_mIoU;  // means over seeds
};

std::vector<double> default_ablation_values(AblationParameter parameter);

// Dynamic strategy, first budget of the experiment, one value swept at a time.
std::vector<AblationRow> run_ablation(const ExperimentSpec& spec, AblationParameter parameter,
                                      const std::vector<double>& values);
std::string format_ablation_csv(AblationParameter parameter, const std::vector<AblationRow>& rows);

// Mixes an experiment seed with an image index into the per-image sampler seed.
std::uint64_t image_seed(std::uint64_t seed, std::size_t image_index);

}  // namespace sparseseg::bench
