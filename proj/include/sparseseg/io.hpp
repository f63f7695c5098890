#pragma once

// File formats: PNG rasters, point-label CSV, label schema JSON, tar bundles.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sparseseg/raster.hpp"

namespace sparseseg::io {

using Bytes = std::vector<std::uint8_t>;

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);
void write_file(const std::filesystem::path& path, const Bytes& contents);

// Any PNG colour type is converted to 8-bit RGB (alpha dropped).
RgbImage decode_rgb_png(const Bytes& png);
RgbImage read_rgb_png(const std::filesystem::path& path);
Bytes encode_rgb_png(const RgbImage& image);
void write_rgb_png(const std::filesystem::path& path, const RgbImage& image);

// Label maps are single-channel 8-bit PNGs whose pixel values are class ids.
// Palette PNGs are read as raw indices.
LabelMap decode_label_png(const Bytes& png);
LabelMap read_label_png(const std::filesystem::path& path);
Bytes encode_label_png(const LabelMap& labels);
void write_label_png(const std::filesystem::path& path, const LabelMap& labels);

Bytes encode_gray16_png(const Grid<std::uint16_t>& values);
Bytes encode_gray8_png(const Grid<std::uint8_t>& values);

// Scalar field in [lo, hi] mapped linearly to 8-bit grey.
Bytes encode_field_png(const Grid<double>& field, double lo = 0.0, double hi = 1.0);

// Alpha blend of class colours over the image; opacity 0 keeps the image.
RgbImage overlay(const RgbImage& image, const LabelMap& labels, const LabelSchema& schema,
                 double opacity);

// Point CSV: header "x,y,label", one row per point in acquisition order.
// Unlabeled rows carry label 255.
struct CsvPoint {
  PixelCoord point;
  int label = kUnlabeled;
  int row = 0;  // 1-based data row number, for diagnostics
};

std::vector<CsvPoint> parse_points_csv(std::string_view text);
std::vector<CsvPoint> read_points_csv(const std::filesystem::path& path);
std::string format_points_csv(const std::vector<CsvPoint>& points);
std::string format_points_csv(const PointLabelSet& points);

// Builds a PointLabelSet from labeled CSV rows; rows with label 255 are skipped.
// Throws InvalidArgument naming the offending row for out-of-bounds points,
// bad labels or duplicates.
PointLabelSet to_point_set(const std::vector<CsvPoint>& rows, ImageDims dims, int class_count);

// Schema JSON: {"background_id": 0, "classes": [{"id": 0, "name": "...", "color": [r,g,b]}]}
LabelSchema parse_schema_json(std::string_view text);
LabelSchema read_schema(const std::filesystem::path& path);
std::string format_schema_json(const LabelSchema& schema);

// Uncompressed POSIX ustar archive.
class TarWriter {
 public:
  void add(const std::string& name, std::string_view contents);
  void add(const std::string& name, const Bytes& contents);
  Bytes finish() &&;

 private:
  Bytes buffer_;
};

struct TarEntry {
  std::string name;
  Bytes contents;
};
std::vector<TarEntry> read_tar(const Bytes& archive);

}  // namespace sparseseg::io
