#include "sparseseg/color.hpp"

#include <cmath>

namespace sparseseg {

namespace {

const std::array<double, 256>& linear_lut() {
  static const std::array<double, 256> lut = [] {
    std::array<double, 256> t{};
    for (int i = 0; i < 256; ++i) {
      const double c = i / 255.0;
      t[std::size_t(i)] = c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
    }
    return t;
  }();
  return lut;
}

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

}  // namespace

std::array<double, 3> srgb_to_lab(Rgb c) {
  const auto& lut = linear_lut();
  const double r = lut[c[0]], g = lut[c[1]], b = lut[c[2]];
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  const double fx = lab_f(x / 0.95047), fy = lab_f(y), fz = lab_f(z / 1.08883);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

LabImage to_lab(const RgbImage& image) {
  const ImageDims dims = image.dims();
  LabImage out{Grid<double>(dims.height, dims.width), Grid<double>(dims.height, dims.width),
               Grid<double>(dims.height, dims.width)};
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      const auto lab = srgb_to_lab(image.at(x, y));
      out.L(y, x) = lab[0];
      out.a(y, x) = lab[1];
      out.b(y, x) = lab[2];
    }
  }
  return out;
}

}  // namespace sparseseg
