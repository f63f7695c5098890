#pragma once

// Pixel confusion counts and the mPA / mIoU family of metrics, standard and
// "masked" (ground-truth background pixels excluded).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sparseseg/raster.hpp"

namespace sparseseg {

class ConfusionMatrix {
 public:
  using Counts = Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic>;

  explicit ConfusionMatrix(int class_count);

  int class_count() const { return int(counts_.rows()); }
  // rows = ground truth, cols = prediction
  const Counts& counts() const { return counts_; }
  std::uint64_t ignored_pixels() const { return ignored_; }
  std::uint64_t evaluated_pixels() const { return counts_.sum(); }

  // Ground-truth sentinel pixels are skipped and counted as ignored. Throws
  // DimsMismatch, PredContainsSentinel, or InvalidArgument for ids >= m.
  void accumulate(const LabelMap& gt, const LabelMap& pred);
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix& a, const ConfusionMatrix& b) {
    return a.ignored_ == b.ignored_ && a.counts_ == b.counts_;
  }

 private:
  Counts counts_;
  std::uint64_t ignored_ = 0;
};

struct ClassScore {
  int class_id = 0;
  bool present = false;          // TP + FP + FN > 0
  std::optional<double> pa;      // undefined when TP + FN = 0
  std::optional<double> iou;
};

struct MetricSummary {
  bool masked = false;
  std::vector<ClassScore> per_class;  // one entry per class in the schema
  double mean_pa = 0.0;
  double mean_iou = 0.0;
  std::uint64_t evaluated_pixels = 0;
};

// Means run over present classes only; classes without ground-truth support
// (TP + FN = 0) still enter mIoU with IoU = 0 but have no PA. Masked mode
// drops ground-truth background rows and the background class. Throws
// EmptyMatrix when nothing remains to evaluate.
MetricSummary compute_metrics(const ConfusionMatrix& cm, const LabelSchema& schema, bool masked);

struct MetricReport {
  MetricSummary standard;
  MetricSummary masked;

  double mPA() const { return standard.mean_pa; }
  double mIoU() const { return standard.mean_iou; }
  double masked_mPA() const { return masked.mean_pa; }
  double masked_mIoU() const { return masked.mean_iou; }
};

// Masked values are NaN when only background pixels were evaluated.
MetricReport make_report(const ConfusionMatrix& cm, const LabelSchema& schema);

struct ClassRow {
  int class_id;
  std::string name;
  std::optional<double> pa;
  std::optional<double> iou;
};

std::vector<ClassRow> report_per_class(const MetricSummary& summary, const LabelSchema& schema);

// "class,name,PA,IoU" rows for `summary`, then a "metric,value" block.
std::string format_metrics_csv(const MetricReport& report, const LabelSchema& schema, bool masked,
                               std::uint64_t ignored_pixels);
std::string format_metrics_json(const MetricReport& report, const LabelSchema& schema,
                                std::uint64_t ignored_pixels);

}  // namespace sparseseg
