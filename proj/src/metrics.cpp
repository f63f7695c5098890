#include "sparseseg/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "json.hpp"

namespace sparseseg {

namespace {

std::string format_value(std::optional<double> v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(int class_count) : counts_(Counts::Zero(class_count, class_count)) {
  if (class_count < 1 || class_count > 255) {
    throw Error(ErrorKind::InvalidArgument, "class count must be in [1, 255]");
  }
}

void ConfusionMatrix::accumulate(const LabelMap& gt, const LabelMap& pred) {
  if (gt.dims() != pred.dims()) throw Error(ErrorKind::DimsMismatch, "ground truth and prediction dims differ");
  if (pred.sentinel_count() != 0) {
    throw Error(ErrorKind::PredContainsSentinel, "prediction has unlabeled pixels");
  }
  const int m = class_count();
  const ClassId* g = gt.data().data();
  const ClassId* p = pred.data().data();
  const auto n = std::size_t(gt.data().size());
  Counts local = Counts::Zero(m, m);
  std::uint64_t ignored = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (g[i] == kUnlabeled) {
      ++ignored;
      continue;
    }
    if (g[i] >= m || p[i] >= m) {
      throw Error(ErrorKind::InvalidArgument, "class id " + std::to_string(std::max(g[i], p[i])) +
                                                  " outside schema of " + std::to_string(m) + " classes");
    }
    ++local(g[i], p[i]);
  }
  counts_ += local;
  ignored_ += ignored;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.class_count() != class_count()) throw Error(ErrorKind::DimsMismatch, "class counts differ");
  counts_ += other.counts_;
  ignored_ += other.ignored_;
  return *this;
}

MetricSummary compute_metrics(const ConfusionMatrix& cm, const LabelSchema& schema, bool masked) {
  const int m = cm.class_count();
  if (schema.class_count() != m) throw Error(ErrorKind::InvalidArgument, "schema and matrix class counts differ");
  ConfusionMatrix::Counts counts = cm.counts();
  if (masked) counts.row(schema.background_id).setZero();

  MetricSummary out;
  out.masked = masked;
  out.evaluated_pixels = counts.sum();
  if (out.evaluated_pixels == 0) throw Error(ErrorKind::EmptyMatrix, "no evaluated pixels");

  double pa_sum = 0.0, iou_sum = 0.0;
  int pa_n = 0, iou_n = 0;
  for (int c = 0; c < m; ++c) {
    ClassScore score;
    score.class_id = c;
    if (masked && c == schema.background_id) {
      out.per_class.push_back(score);
      continue;
    }
    const double tp = double(counts(c, c));
    const double fn = double(counts.row(c).sum()) - tp;
    const double fp = double(counts.col(c).sum()) - tp;
    score.present = tp + fp + fn > 0;
    if (score.present) {
      score.iou = tp / (tp + fp + fn);
      iou_sum += *score.iou;
      ++iou_n;
      if (tp + fn > 0) {
        score.pa = tp / (tp + fn);
        pa_sum += *score.pa;
        ++pa_n;
      }
    }
    out.per_class.push_back(score);
  }
  out.mean_pa = pa_n ? pa_sum / pa_n : 0.0;
  out.mean_iou = iou_n ? iou_sum / iou_n : 0.0;
  return out;
}

MetricReport make_report(const ConfusionMatrix& cm, const LabelSchema& schema) {
  MetricReport report;
  report.standard = compute_metrics(cm, schema, false);
  try {
    report.masked = compute_metrics(cm, schema, true);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::EmptyMatrix) throw;
    report.masked.masked = true;
    report.masked.mean_pa = report.masked.mean_iou = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

std::vector<ClassRow> report_per_class(const MetricSummary& summary, const LabelSchema& schema) {
  std::vector<ClassRow> rows;
  for (const ClassScore& s : summary.per_class) {
    if (!s.present) continue;
    rows.push_back({s.class_id, schema.names[std::size_t(s.class_id)], s.pa, s.iou});
  }
  return rows;
}

std::string format_metrics_csv(const MetricReport& report, const LabelSchema& schema, bool masked,
                               std::uint64_t ignored_pixels) {
  const MetricSummary& table = masked ? report.masked : report.standard;
  std::string out = "class,name,PA,IoU\n";
  for (const ClassRow& row : report_per_class(table, schema)) {
    out += std::to_string(row.class_id) + "," + row.name + "," + format_value(row.pa) + "," +
           format_value(row.iou) + "\n";
  }
  out += "\nmetric,value\n";
  out += "mPA," + format_value(report.mPA()) + "\n";
  out += "mIoU," + format_value(report.mIoU()) + "\n";
  out += "masked_mPA," + format_value(report.masked_mPA()) + "\n";
  out += "masked_mIoU," + format_value(report.masked_mIoU()) + "\n";
  out += "evaluated_pixels," + std::to_string(report.standard.evaluated_pixels) + "\n";
  out += "ignored_pixels," + std::to_string(ignored_pixels) + "\n";
  out += std::string("per_class_table,") + (masked ? "masked" : "standard") + "\n";
  out += "absent_classes,excluded\n";
  return out;
}

std::string format_metrics_json(const MetricReport& report, const LabelSchema& schema,
                                std::uint64_t ignored_pixels) {
  auto summary_json = [&](const MetricSummary& s) {
    nlohmann::json classes = nlohmann::json::array();
    for (const ClassScore& c : s.per_class) {
      nlohmann::json entry = {{"class", c.class_id},
                              {"name", schema.names[std::size_t(c.class_id)]},
                              {"present", c.present}};
      entry["PA"] = c.pa ? nlohmann::json(*c.pa) : nlohmann::json(nullptr);
      entry["IoU"] = c.iou ? nlohmann::json(*c.iou) : nlohmann::json(nullptr);
      classes.push_back(entry);
    }
    auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
    return nlohmann::json{{"mPA", num(s.mean_pa)},
                          {"mIoU", num(s.mean_iou)},
                          {"evaluated_pixels", s.evaluated_pixels},
                          {"classes", classes}};
  };
  nlohmann::json doc = {{"standard", summary_json(report.standard)},
                        {"masked", summary_json(report.masked)},
                        {"ignored_pixels", ignored_pixels},
                        {"absent_class_rule", "classes with TP+FP+FN=0 are excluded from means"}};
  return doc.dump(2) + "\n";
}

}  // namespace sparseseg
