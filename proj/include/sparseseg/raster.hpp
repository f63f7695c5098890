#pragma once

// Dense image and label grids, point-label sets and the run-length mask codec.
//
// Grids are row-major Eigen arrays indexed (row, col) = (y, x). Pixel
// coordinates follow the raster convention: x is the column, y the row,
// origin at the top-left corner.

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sparseseg/error.hpp"

namespace sparseseg {

template <typename T>
using Grid = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Bitmap = Grid<bool>;
using ClassId = std::uint8_t;

inline constexpr ClassId kUnlabeled = 255;

struct ImageDims {
  int width = 0;
  int height = 0;

  ImageDims() = default;
  ImageDims(int w, int h);

  double diagonal() const { return std::sqrt(double(width) * width + double(height) * height); }
  std::size_t pixel_count() const { return std::size_t(width) * std::size_t(height); }

  template <typename Derived>
  static ImageDims of(const Eigen::DenseBase<Derived>& grid) {
    return ImageDims(int(grid.cols()), int(grid.rows()));
  }

  friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

struct PixelCoord {
  int x = 0;
  int y = 0;

  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
  friend auto operator<=>(const PixelCoord& a, const PixelCoord& b) {
    // Row-major order.
    if (a.y != b.y) return a.y <=> b.y;
    return a.x <=> b.x;
  }
};

inline bool in_bounds(const ImageDims& dims, PixelCoord p) {
  return p.x >= 0 && p.y >= 0 && p.x < dims.width && p.y < dims.height;
}

inline std::size_t linear_index(const ImageDims& dims, PixelCoord p) {
  return std::size_t(p.y) * std::size_t(dims.width) + std::size_t(p.x);
}

inline PixelCoord coord_of(const ImageDims& dims, std::size_t index) {
  return {int(index % std::size_t(dims.width)), int(index / std::size_t(dims.width))};
}

template <typename Scalar = double>
Scalar distance(PixelCoord p, Scalar cx, Scalar cy) {
  const Scalar dx = Scalar(p.x) - cx;
  const Scalar dy = Scalar(p.y) - cy;
  return std::sqrt(dx * dx + dy * dy);
}

using Rgb = std::array<std::uint8_t, 3>;

struct LabelSchema {
  std::vector<std::string> names;
  std::vector<Rgb> colors;
  ClassId background_id = 0;

  int class_count() const { return int(names.size()); }
  bool valid_label(int label) const { return label >= 0 && label < class_count(); }
  // Throws InvalidArgument if the invariants do not hold.
  void validate() const;

  static LabelSchema with_default_names(int class_count, ClassId background_id = 0);
};

// Deterministic distinct colors for class overlays when no schema colors are given.
Rgb default_class_color(int class_id);

struct PointLabel {
  PixelCoord point;
  ClassId label = 0;
  int order_index = 0;
};

// Ordered, duplicate-free point-label set. order_index is assigned on insert.
class PointLabelSet {
 public:
  PointLabelSet() = default;

  // Throws InvalidArgument on a duplicate coordinate.
  const PointLabel& add(PixelCoord p, ClassId label);
  void pop_back();

  bool contains(PixelCoord p) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const PointLabel& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<PointLabel>& entries() const { return entries_; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<PointLabel> entries_;
};

// H×W grid of class ids; kUnlabeled marks unassigned pixels.
class LabelMap {
 public:
  LabelMap() = default;
  explicit LabelMap(ImageDims dims, ClassId fill = kUnlabeled);
  explicit LabelMap(Grid<ClassId> data) : data_(std::move(data)) {}

  ImageDims dims() const { return ImageDims::of(data_); }
  ClassId operator()(PixelCoord p) const { return data_(p.y, p.x); }
  ClassId& operator()(PixelCoord p) { return data_(p.y, p.x); }
  const Grid<ClassId>& data() const { return data_; }
  Grid<ClassId>& data() { return data_; }

  std::size_t sentinel_count() const { return std::size_t((data_ == kUnlabeled).count()); }

  friend bool operator==(const LabelMap& a, const LabelMap& b) {
    return a.data_.rows() == b.data_.rows() && a.data_.cols() == b.data_.cols() &&
           (a.data_ == b.data_).all();
  }

 private:
  Grid<ClassId> data_;
};

struct RgbImage {
  Grid<std::uint8_t> r, g, b;

  RgbImage() = default;
  explicit RgbImage(ImageDims dims);

  ImageDims dims() const { return ImageDims::of(r); }
  Rgb at(int x, int y) const { return {r(y, x), g(y, x), b(y, x)}; }
  void set(int x, int y, Rgb c) {
    r(y, x) = c[0];
    g(y, x) = c[1];
    b(y, x) = c[2];
  }
};

// Row-major run lengths; the first run counts zeros and may be empty.
struct RleMask {
  ImageDims dims;
  std::vector<std::uint32_t> counts;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

RleMask rle_encode(const Bitmap& bitmap);
// Throws MalformedRle when the counts do not sum to W·H.
Bitmap rle_decode(const RleMask& mask);

struct AreaCentroid {
  std::size_t area = 0;
  double cx = 0.0;
  double cy = 0.0;
};

// Throws EmptyMask when no pixel is set.
AreaCentroid mask_area_centroid(const Bitmap& bitmap);

struct BoundingBox {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive

  bool empty() const { return x1 < x0 || y1 < y0; }
  BoundingBox intersect(const BoundingBox& o) const {
    return {std::max(x0, o.x0), std::max(y0, o.y0), std::min(x1, o.x1), std::min(y1, o.y1)};
  }
};

BoundingBox bounding_box(const Bitmap& bitmap);

}  // namespace sparseseg
