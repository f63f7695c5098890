#pragma once

// SLIC superpixels and point-label propagation over them.

#include <vector>

#include "sparseseg/color.hpp"
#include "sparseseg/raster.hpp"

namespace sparseseg {

struct SlicConfig {
  int superpixels = 100;  // target K
  double compactness = 10.0;
  int iterations = 10;
};

struct SuperpixelMap {
  Grid<int> assignment;                          // ids in [0, count)
  int count = 0;
  Eigen::Matrix<double, Eigen::Dynamic, 5> features;  // mean L, a, b, x, y per superpixel
  std::vector<std::size_t> areas;
  double step = 1.0;  // S = sqrt(W·H / K)
  double compactness = 10.0;

  ImageDims dims() const { return ImageDims::of(assignment); }

  // Squared SLIC distance between the feature rows of two superpixels.
  double feature_distance2(int i, int j) const;
};

SuperpixelMap slic_segment(const RgbImage& image, const SlicConfig& config = {});
SuperpixelMap slic_segment(const LabImage& lab, const SlicConfig& config = {});

// Labels every pixel: superpixels containing points take the majority label,
// the rest copy the nearest labeled superpixel in (L, a, b, x, y) space.
// Throws EmptyPointSet when `points` is empty.
LabelMap propagate_point_labels(const SuperpixelMap& sp, const PointLabelSet& points);

// 16-bit assignment map and boundary overlay, for debugging.
Grid<std::uint16_t> assignment_u16(const SuperpixelMap& sp);
RgbImage boundary_overlay(const RgbImage& image, const SuperpixelMap& sp, Rgb color = {255, 0, 0});

}  // namespace sparseseg
