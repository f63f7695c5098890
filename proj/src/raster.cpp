#include "sparseseg/raster.hpp"

#include <algorithm>
#include <numeric>

namespace sparseseg {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::MalformedRle: return "MalformedRle";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::ManifestParseError: return "ManifestParseError";
    case ErrorKind::DimsMismatch: return "DimsMismatch";
    case ErrorKind::InconsistentMetadata: return "InconsistentMetadata";
    case ErrorKind::EmptyPointSet: return "EmptyPointSet";
    case ErrorKind::BudgetExhausted: return "BudgetExhausted";
    case ErrorKind::ImageExhausted: return "ImageExhausted";
    case ErrorKind::EmptyOverlap: return "EmptyOverlap";
    case ErrorKind::IncompleteFill: return "IncompleteFill";
    case ErrorKind::PredContainsSentinel: return "PredContainsSentinel";
    case ErrorKind::EmptyMatrix: return "EmptyMatrix";
    case ErrorKind::DatasetInvalid: return "DatasetInvalid";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

ImageDims::ImageDims(int w, int h) : width(w), height(h) {
  if (w < 1 || h < 1) {
    throw Error(ErrorKind::InvalidArgument,
                "image dims must be positive, got " + std::to_string(w) + "x" + std::to_string(h));
  }
}

void LabelSchema::validate() const {
  if (names.empty() || names.size() > 255) {
    throw Error(ErrorKind::InvalidArgument, "class count must be in [1, 255]");
  }
  if (background_id >= names.size()) {
    throw Error(ErrorKind::InvalidArgument, "background_id out of range");
  }
  if (!colors.empty() && colors.size() != names.size()) {
    throw Error(ErrorKind::InvalidArgument, "colors must have one entry per class");
  }
}

LabelSchema LabelSchema::with_default_names(int class_count, ClassId background_id) {
  LabelSchema schema;
  for (int c = 0; c < class_count; ++c) {
    schema.names.push_back(c == background_id ? "background" : "class_" + std::to_string(c));
    schema.colors.push_back(default_class_color(c));
  }
  schema.background_id = background_id;
  schema.validate();
  return schema;
}

Rgb default_class_color(int class_id) {
  static constexpr std::array<Rgb, 12> kPalette = {{
      {0, 0, 0},       {230, 25, 75},  {60, 180, 75},   {255, 225, 25},
      {0, 130, 200},   {245, 130, 48}, {145, 30, 180},  {70, 240, 240},
      {240, 50, 230},  {210, 245, 60}, {250, 190, 212}, {0, 128, 128},
  }};
  if (class_id < int(kPalette.size())) return kPalette[std::size_t(class_id)];
  // Golden-ratio hue walk for the rest.
  const double h = std::fmod(class_id * 0.618033988749895, 1.0) * 6.0;
  const int sector = int(h);
  const double f = h - sector;
  const auto v = std::uint8_t(220), lo = std::uint8_t(60);
  const auto mid_up = std::uint8_t(lo + (v - lo) * f), mid_down = std::uint8_t(v - (v - lo) * f);
  switch (sector % 6) {
    case 0: return {v, mid_up, lo};
    case 1: return {mid_down, v, lo};
    case 2: return {lo, v, mid_up};
    case 3: return {lo, mid_down, v};
    case 4: return {mid_up, lo, v};
    default: return {v, lo, mid_down};
  }
}

const PointLabel& PointLabelSet::add(PixelCoord p, ClassId label) {
  if (contains(p)) {
    throw Error(ErrorKind::InvalidArgument,
                "duplicate point (" + std::to_string(p.x) + "," + std::to_string(p.y) + ")");
  }
  entries_.push_back({p, label, int(entries_.size())});
  return entries_.back();
}

void PointLabelSet::pop_back() {
  if (!entries_.empty()) entries_.pop_back();
}

bool PointLabelSet::contains(PixelCoord p) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [p](const PointLabel& e) { return e.point == p; });
}

LabelMap::LabelMap(ImageDims dims, ClassId fill)
    : data_(Grid<ClassId>::Constant(dims.height, dims.width, fill)) {}

RgbImage::RgbImage(ImageDims dims)
    : r(Grid<std::uint8_t>::Zero(dims.height, dims.width)),
      g(Grid<std::uint8_t>::Zero(dims.height, dims.width)),
      b(Grid<std::uint8_t>::Zero(dims.height, dims.width)) {}

RleMask rle_encode(const Bitmap& bitmap) {
  RleMask out{ImageDims::of(bitmap), {}};
  const bool* bits = bitmap.data();
  const std::size_t n = std::size_t(bitmap.size());
  bool current = false;
  std::uint32_t run = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (bits[i] != current) {
      out.counts.push_back(run);
      run = 0;
      current = bits[i];
    }
    ++run;
  }
  out.counts.push_back(run);
  return out;
}

Bitmap rle_decode(const RleMask& mask) {
  const std::uint64_t total =
      std::accumulate(mask.counts.begin(), mask.counts.end(), std::uint64_t{0});
  if (total != mask.dims.pixel_count()) {
    throw Error(ErrorKind::MalformedRle, "run lengths sum to " + std::to_string(total) +
                                             ", expected " +
                                             std::to_string(mask.dims.pixel_count()));
  }
  Bitmap out(mask.dims.height, mask.dims.width);
  bool* bits = out.data();
  bool value = false;
  for (std::uint32_t run : mask.counts) {
    std::fill_n(bits, run, value);
    bits += run;
    value = !value;
  }
  return out;
}

AreaCentroid mask_area_centroid(const Bitmap& bitmap) {
  AreaCentroid out;
  double sx = 0.0, sy = 0.0;
  for (Eigen::Index y = 0; y < bitmap.rows(); ++y) {
    for (Eigen::Index x = 0; x < bitmap.cols(); ++x) {
      if (bitmap(y, x)) {
        ++out.area;
        sx += double(x);
        sy += double(y);
      }
    }
  }
  if (out.area == 0) throw Error(ErrorKind::EmptyMask, "mask has no set pixels");
  out.cx = sx / double(out.area);
  out.cy = sy / double(out.area);
  return out;
}

BoundingBox bounding_box(const Bitmap& bitmap) {
  BoundingBox box{int(bitmap.cols()), int(bitmap.rows()), -1, -1};
  for (Eigen::Index y = 0; y < bitmap.rows(); ++y) {
    for (Eigen::Index x = 0; x < bitmap.cols(); ++x) {
      if (!bitmap(y, x)) continue;
      box.x0 = std::min(box.x0, int(x));
      box.x1 = std::max(box.x1, int(x));
      box.y0 = std::min(box.y0, int(y));
      box.y1 = std::max(box.y1, int(y));
    }
  }
  return box;
}

}  // namespace sparseseg
