#include "sparseseg/superpixels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace sparseseg {

namespace {

struct Center {
  double L, a, b, x, y;
};

double lab_gradient(const LabImage& lab, int x, int y) {
  const ImageDims d = lab.dims();
  const int xm = std::max(x - 1, 0), xp = std::min(x + 1, d.width - 1);
  const int ym = std::max(y - 1, 0), yp = std::min(y + 1, d.height - 1);
  auto sq = [&](int x0, int y0, int x1, int y1) {
    const double dl = lab.L(y0, x0) - lab.L(y1, x1);
    const double da = lab.a(y0, x0) - lab.a(y1, x1);
    const double db = lab.b(y0, x0) - lab.b(y1, x1);
    return dl * dl + da * da + db * db;
  };
  return sq(xp, y, xm, y) + sq(x, yp, x, ym);
}

std::vector<Center> initial_centers(const LabImage& lab, int k, double step, int& nx, int& ny) {
  const ImageDims d = lab.dims();
  nx = std::max(1, int(std::lround(d.width / step)));
  ny = std::max(1, int(std::lround(d.height / step)));
  while (nx * ny > k) {
    if (nx >= ny && nx > 1) {
      --nx;
    } else {
      --ny;
    }
  }
  std::vector<Center> centers;
  centers.reserve(std::size_t(nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      int cx = std::min(int((i + 0.5) * d.width / nx), d.width - 1);
      int cy = std::min(int((j + 0.5) * d.height / ny), d.height - 1);
      // Move to the lowest-gradient pixel of the 3x3 neighbourhood; stay on ties.
      double best = lab_gradient(lab, cx, cy);
      int bx = cx, by = cy;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int x = cx + dx, y = cy + dy;
          if (x < 0 || y < 0 || x >= d.width || y >= d.height) continue;
          const double g = lab_gradient(lab, x, y);
          if (g < best) {
            best = g;
            bx = x;
            by = y;
          }
        }
      }
      centers.push_back({lab.L(by, bx), lab.a(by, bx), lab.b(by, bx), double(bx), double(by)});
    }
  }
  return centers;
}

// Keeps the largest 4-connected piece of every label and merges the other
// pieces into the largest adjacent region. Returns relabelled ids in
// row-major order of first appearance.
int enforce_connectivity(Grid<int>& labels) {
  const int h = int(labels.rows()), w = int(labels.cols());
  const std::size_t n = std::size_t(w) * std::size_t(h);
  std::vector<int> comp(n, -1);
  std::vector<int> comp_label;
  std::vector<std::size_t> comp_size;
  std::vector<std::size_t> stack;
  const int* lab = labels.data();
  for (std::size_t start = 0; start < n; ++start) {
    if (comp[start] >= 0) continue;
    const int id = int(comp_label.size());
    comp_label.push_back(lab[start]);
    comp_size.push_back(0);
    comp[start] = id;
    stack.assign(1, start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++comp_size[std::size_t(id)];
      const int x = int(p % std::size_t(w)), y = int(p / std::size_t(w));
      const std::size_t nbrs[4] = {x > 0 ? p - 1 : n, x + 1 < w ? p + 1 : n,
                                   y > 0 ? p - std::size_t(w) : n, y + 1 < h ? p + std::size_t(w) : n};
      for (std::size_t q : nbrs) {
        if (q < n && comp[q] < 0 && lab[q] == lab[start]) {
          comp[q] = id;
          stack.push_back(q);
        }
      }
    }
  }
  const std::size_t ncomp = comp_label.size();

  std::vector<std::vector<int>> adjacency(ncomp);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = std::size_t(y) * std::size_t(w) + std::size_t(x);
      if (x + 1 < w && comp[p] != comp[p + 1]) {
        adjacency[std::size_t(comp[p])].push_back(comp[p + 1]);
        adjacency[std::size_t(comp[p + 1])].push_back(comp[p]);
      }
      if (y + 1 < h && comp[p] != comp[p + std::size_t(w)]) {
        adjacency[std::size_t(comp[p])].push_back(comp[p + std::size_t(w)]);
        adjacency[std::size_t(comp[p + std::size_t(w)])].push_back(comp[p]);
      }
    }
  }
  for (auto& a : adjacency) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }

  // Largest piece per label survives; ties go to the first piece in scan order.
  std::map<int, int> main_piece;
  for (std::size_t c = 0; c < ncomp; ++c) {
    auto [it, inserted] = main_piece.emplace(comp_label[c], int(c));
    if (!inserted && comp_size[c] > comp_size[std::size_t(it->second)]) it->second = int(c);
  }
  std::vector<bool> kept(ncomp, false);
  std::map<int, std::size_t> region_area;
  for (const auto& [label, c] : main_piece) {
    kept[std::size_t(c)] = true;
    region_area[label] = comp_size[std::size_t(c)];
  }
  bool pending = true;
  while (pending) {
    pending = false;
    for (std::size_t c = 0; c < ncomp; ++c) {
      if (kept[c]) continue;
      int target = -1;
      for (int nb : adjacency[c]) {
        if (!kept[std::size_t(nb)]) continue;
        const int label = comp_label[std::size_t(nb)];
        if (target < 0 || region_area[label] > region_area[target] ||
            (region_area[label] == region_area[target] && label < target)) {
          target = label;
        }
      }
      if (target < 0) {
        pending = true;
        continue;
      }
      comp_label[c] = target;
      kept[c] = true;
      region_area[target] += comp_size[c];
    }
  }

  std::map<int, int> remap;
  int* out = labels.data();
  for (std::size_t p = 0; p < n; ++p) {
    const int label = comp_label[std::size_t(comp[p])];
    auto [it, inserted] = remap.emplace(label, int(remap.size()));
    out[p] = it->second;
  }
  return int(remap.size());
}

}  // namespace

double SuperpixelMap::feature_distance2(int i, int j) const {
  const auto d = (features.row(i) - features.row(j)).array();
  const double spatial = compactness / step;
  return d.head<3>().square().sum() + spatial * spatial * d.tail<2>().square().sum();
}

SuperpixelMap slic_segment(const RgbImage& image, const SlicConfig& config) {
  return slic_segment(to_lab(image), config);
}

SuperpixelMap slic_segment(const LabImage& lab, const SlicConfig& config) {
  if (config.superpixels < 1 || config.iterations < 1) {
    throw Error(ErrorKind::InvalidArgument, "SLIC needs K >= 1 and iterations >= 1");
  }
  const ImageDims d = lab.dims();
  const double step = std::sqrt(double(d.pixel_count()) / config.superpixels);
  int nx = 1, ny = 1;
  std::vector<Center> centers = initial_centers(lab, config.superpixels, step, nx, ny);
  const double wx = std::max(step, double(d.width) / nx);
  const double wy = std::max(step, double(d.height) / ny);
  const double spatial = config.compactness / step;
  const double spatial2 = spatial * spatial;

  Grid<int> labels = Grid<int>::Constant(d.height, d.width, -1);
  Grid<double> dist(d.height, d.width);
  auto pixel_distance = [&](const Center& c, int x, int y) {
    const double dl = lab.L(y, x) - c.L, da = lab.a(y, x) - c.a, db = lab.b(y, x) - c.b;
    const double dx = x - c.x, dy = y - c.y;
    return dl * dl + da * da + db * db + spatial2 * (dx * dx + dy * dy);
  };

  for (int iter = 0; iter < config.iterations; ++iter) {
    dist.setConstant(std::numeric_limits<double>::infinity());
    labels.setConstant(-1);
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const Center& c = centers[k];
      const int x0 = std::max(0, int(std::floor(c.x - wx))), x1 = std::min(d.width - 1, int(std::ceil(c.x + wx)));
      const int y0 = std::max(0, int(std::floor(c.y - wy))), y1 = std::min(d.height - 1, int(std::ceil(c.y + wy)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double dd = pixel_distance(c, x, y);
          if (dd < dist(y, x)) {
            dist(y, x) = dd;
            labels(y, x) = int(k);
          }
        }
      }
    }
    // Pixels outside every window go to the globally nearest centre.
    for (int y = 0; y < d.height; ++y) {
      for (int x = 0; x < d.width; ++x) {
        if (labels(y, x) >= 0) continue;
        for (std::size_t k = 0; k < centers.size(); ++k) {
          const double dd = pixel_distance(centers[k], x, y);
          if (dd < dist(y, x)) {
            dist(y, x) = dd;
            labels(y, x) = int(k);
          }
        }
      }
    }
    std::vector<Center> sums(centers.size(), Center{0, 0, 0, 0, 0});
    std::vector<std::size_t> counts(centers.size(), 0);
    for (int y = 0; y < d.height; ++y) {
      for (int x = 0; x < d.width; ++x) {
        const auto k = std::size_t(labels(y, x));
        sums[k].L += lab.L(y, x);
        sums[k].a += lab.a(y, x);
        sums[k].b += lab.b(y, x);
        sums[k].x += x;
        sums[k].y += y;
        ++counts[k];
      }
    }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      if (counts[k] == 0) continue;
      const double inv = 1.0 / double(counts[k]);
      centers[k] = {sums[k].L * inv, sums[k].a * inv, sums[k].b * inv, sums[k].x * inv, sums[k].y * inv};
    }
  }

  SuperpixelMap sp;
  sp.count = enforce_connectivity(labels);
  sp.assignment = std::move(labels);
  sp.step = step;
  sp.compactness = config.compactness;
  sp.features = Eigen::Matrix<double, Eigen::Dynamic, 5>::Zero(sp.count, 5);
  sp.areas.assign(std::size_t(sp.count), 0);
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      const int k = sp.assignment(y, x);
      sp.features.row(k) += Eigen::Matrix<double, 1, 5>(lab.L(y, x), lab.a(y, x), lab.b(y, x), x, y);
      ++sp.areas[std::size_t(k)];
    }
  }
  for (int k = 0; k < sp.count; ++k) sp.features.row(k) /= double(sp.areas[std::size_t(k)]);
  return sp;
}

LabelMap propagate_point_labels(const SuperpixelMap& sp, const PointLabelSet& points) {
  if (points.empty()) throw Error(ErrorKind::EmptyPointSet, "no point labels to propagate");
  const ImageDims d = sp.dims();
  // Contained points per superpixel, in acquisition order.
  std::vector<std::vector<const PointLabel*>> contained(std::size_t(sp.count));
  for (const PointLabel& p : points) {
    if (!in_bounds(d, p.point)) throw Error(ErrorKind::InvalidArgument, "point outside image");
    contained[std::size_t(sp.assignment(p.point.y, p.point.x))].push_back(&p);
  }
  std::vector<int> sp_label(std::size_t(sp.count), -1);
  std::vector<int> labeled;
  for (int k = 0; k < sp.count; ++k) {
    const auto& members = contained[std::size_t(k)];
    if (members.empty()) continue;
    std::array<int, 256> votes{};
    for (const PointLabel* p : members) ++votes[p->label];
    int best = -1;
    // First contained point (lowest order_index) reaching the max count wins ties.
    const int top = *std::max_element(votes.begin(), votes.end());
    for (const PointLabel* p : members) {
      if (votes[p->label] == top) {
        best = p->label;
        break;
      }
    }
    sp_label[std::size_t(k)] = best;
    labeled.push_back(k);
  }
  for (int k = 0; k < sp.count; ++k) {
    if (!contained[std::size_t(k)].empty()) continue;
    double best = std::numeric_limits<double>::infinity();
    int nearest = -1;
    for (int j : labeled) {  // ascending ids: strict < keeps the lowest id on ties
      const double dd = sp.feature_distance2(k, j);
      if (dd < best) {
        best = dd;
        nearest = j;
      }
    }
    sp_label[std::size_t(k)] = sp_label[std::size_t(nearest)];
  }
  Grid<ClassId> out(d.height, d.width);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out.data()[i] = ClassId(sp_label[std::size_t(sp.assignment.data()[i])]);
  }
  return LabelMap(std::move(out));
}

Grid<std::uint16_t> assignment_u16(const SuperpixelMap& sp) {
  return sp.assignment.cast<std::uint16_t>();
}

RgbImage boundary_overlay(const RgbImage& image, const SuperpixelMap& sp, Rgb color) {
  RgbImage out = image;
  const ImageDims d = sp.dims();
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      const int k = sp.assignment(y, x);
      const bool edge = (x + 1 < d.width && sp.assignment(y, x + 1) != k) ||
                        (y + 1 < d.height && sp.assignment(y + 1, x) != k);
      if (edge) out.set(x, y, color);
    }
  }
  return out;
}

}  // namespace sparseseg
