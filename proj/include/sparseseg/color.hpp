#pragma once

#include <array>

#include "sparseseg/raster.hpp"

namespace sparseseg {

// CIELAB planes (D65 white point) of an sRGB image.
struct LabImage {
  Grid<double> L, a, b;

  ImageDims dims() const { return ImageDims::of(L); }
};

std::array<double, 3> srgb_to_lab(Rgb c);
LabImage to_lab(const RgbImage& image);

}  // namespace sparseseg
