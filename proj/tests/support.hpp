#pragma once

// Fixtures and brute-force reference implementations shared by the unit and
// acceptance tests. The references deliberately avoid the library's own
// helpers (no cached areas, centroids, bounding boxes or Eigen expressions).

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "sparseseg/augment.hpp"
#include "sparseseg/io.hpp"
#include "sparseseg/proposals.hpp"
#include "sparseseg/raster.hpp"

namespace testing {

using namespace sparseseg;
namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::mt19937_64 gen(std::random_device{}());
    path_ = fs::temp_directory_path() / ("sparseseg-" + tag + "-" + std::to_string(gen()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline int uniform_int(std::mt19937_64& gen, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(gen);
}

// Axis-aligned rectangle or ellipse with at least one pixel set.
inline Bitmap random_blob(ImageDims dims, std::mt19937_64& gen) {
  Bitmap b = Bitmap::Constant(dims.height, dims.width, false);
  const int cx = uniform_int(gen, 0, dims.width - 1), cy = uniform_int(gen, 0, dims.height - 1);
  const int rx = uniform_int(gen, 1, std::max(1, dims.width / 2));
  const int ry = uniform_int(gen, 1, std::max(1, dims.height / 2));
  const bool ellipse = gen() & 1;
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      const double u = double(x - cx) / rx, v = double(y - cy) / ry;
      b(y, x) = ellipse ? u * u + v * v <= 1.0 : std::abs(x - cx) <= rx && std::abs(y - cy) <= ry;
    }
  }
  b(cy, cx) = true;
  return b;
}

inline ProposalSet random_proposals(ImageDims dims, std::mt19937_64& gen, int max_masks) {
  std::vector<CandidateMask> masks;
  const int k = uniform_int(gen, 0, max_masks);
  for (int i = 0; i < k; ++i) {
    masks.push_back(make_candidate(i, random_blob(dims, gen), std::uniform_real_distribution<>(0.5, 1.0)(gen)));
  }
  return ProposalSet(dims, std::move(masks));
}

inline PointLabelSet random_points(ImageDims dims, std::mt19937_64& gen, int count, int classes) {
  PointLabelSet points;
  while (int(points.size()) < count) {
    const PixelCoord p{uniform_int(gen, 0, dims.width - 1), uniform_int(gen, 0, dims.height - 1)};
    if (!points.contains(p)) points.add(p, ClassId(uniform_int(gen, 0, classes - 1)));
  }
  return points;
}

inline RgbImage random_image(ImageDims dims, std::mt19937_64& gen) {
  RgbImage img(dims);
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      img.set(x, y, {std::uint8_t(gen()), std::uint8_t(gen()), std::uint8_t(gen())});
    }
  }
  return img;
}

// Piecewise-constant image with a few coloured rectangles, mild noise.
inline RgbImage blocky_image(ImageDims dims, std::mt19937_64& gen) {
  RgbImage img(dims);
  Rgb base{std::uint8_t(gen()), std::uint8_t(gen()), std::uint8_t(gen())};
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) img.set(x, y, base);
  }
  const int blocks = uniform_int(gen, 1, 4);
  for (int i = 0; i < blocks; ++i) {
    const Bitmap b = random_blob(dims, gen);
    const Rgb c{std::uint8_t(gen()), std::uint8_t(gen()), std::uint8_t(gen())};
    for (int y = 0; y < dims.height; ++y) {
      for (int x = 0; x < dims.width; ++x) {
        if (b(y, x)) img.set(x, y, c);
      }
    }
  }
  return img;
}

inline std::string slurp(const fs::path& p) {
  const io::Bytes b = io::read_file(p);
  return std::string(b.begin(), b.end());
}

namespace oracle {

struct RawMask {
  std::size_t area = 0;
  double cx = 0, cy = 0;
};

inline RawMask scan(const Bitmap& b) {
  RawMask m;
  double sx = 0, sy = 0;
  for (int y = 0; y < int(b.rows()); ++y) {
    for (int x = 0; x < int(b.cols()); ++x) {
      if (!b(y, x)) continue;
      ++m.area;
      sx += x;
      sy += y;
    }
  }
  if (m.area) {
    m.cx = sx / double(m.area);
    m.cy = sy / double(m.area);
  }
  return m;
}

inline double dist(double x0, double y0, double x1, double y1) {
  return std::sqrt((x0 - x1) * (x0 - x1) + (y0 - y1) * (y0 - y1));
}

// O(p) straight from the definition.
inline double object_proximity(const std::vector<Bitmap>& masks, ImageDims dims, int px, int py) {
  if (masks.empty()) return 0.0;
  const double dmax = std::sqrt(double(dims.width * dims.width + dims.height * dims.height));
  double num = 0, den = 0;
  for (const Bitmap& b : masks) {
    const RawMask m = scan(b);
    num += double(m.area) * (1.0 - dist(px, py, m.cx, m.cy) / dmax);
    den += double(m.area);
  }
  return num / den;
}

inline double exploration(const std::vector<PixelCoord>& pts, ImageDims dims, int px, int py) {
  if (pts.empty()) return 0.0;
  const double dmax = std::sqrt(double(dims.width * dims.width + dims.height * dims.height));
  double best = std::numeric_limits<double>::infinity();
  for (PixelCoord q : pts) best = std::min(best, dist(px, py, q.x, q.y));
  return best / dmax;
}

struct ExpandedRef {
  PixelCoord source;
  ClassId label;
  const Bitmap* mask;  // null when the point expanded to nothing
};

// Per-pixel label from the overlap rule; kUnlabeled outside every mask.
inline ClassId merged_label(const std::vector<ExpandedRef>& expanded, const PointLabelSet& points,
                            ImageDims dims, int px, int py) {
  std::vector<int> sig;
  for (int i = 0; i < int(expanded.size()); ++i) {
    if (expanded[std::size_t(i)].mask && (*expanded[std::size_t(i)].mask)(py, px)) sig.push_back(i);
  }
  if (sig.empty()) return kUnlabeled;
  if (sig.size() == 1) return expanded[std::size_t(sig[0])].label;

  std::size_t n = 0;
  double sx = 0, sy = 0;
  auto in_all = [&](int x, int y) {
    for (int i : sig) {
      if (!(*expanded[std::size_t(i)].mask)(y, x)) return false;
    }
    return true;
  };
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      if (!in_all(x, y)) continue;
      ++n;
      sx += x;
      sy += y;
    }
  }
  const double cx = sx / double(n), cy = sy / double(n);

  std::vector<double> score;
  std::vector<std::size_t> area;
  for (int i : sig) {
    double s = 0;
    for (const PointLabel& p : points) {
      if (p.label == expanded[std::size_t(i)].label && in_all(p.point.x, p.point.y)) {
        s += 1.0 / (1.0 + dist(p.point.x, p.point.y, cx, cy));
      }
    }
    score.push_back(s);
    area.push_back(scan(*expanded[std::size_t(i)].mask).area);
  }
  // Lexicographic: primary key descending, then area ascending, then index.
  std::size_t best = 0;
  const bool any = *std::max_element(score.begin(), score.end()) > 0;
  for (std::size_t k = 1; k < sig.size(); ++k) {
    double key_k, key_b;
    if (any) {
      key_k = -score[k];
      key_b = -score[best];
    } else {
      const auto& sk = expanded[std::size_t(sig[k])].source;
      const auto& sb = expanded[std::size_t(sig[best])].source;
      key_k = dist(sk.x, sk.y, cx, cy);
      key_b = dist(sb.x, sb.y, cx, cy);
    }
    if (key_k < key_b || (key_k == key_b && area[k] < area[best])) best = k;
  }
  return expanded[std::size_t(sig[best])].label;
}

}  // namespace oracle

}  // namespace testing
