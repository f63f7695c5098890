#include <map>
#include <queue>
#include <set>

#include "doctest.h"
#include "sparseseg/superpixels.hpp"
#include "support.hpp"

using namespace sparseseg;

namespace {

RgbImage uniform_image(ImageDims dims, Rgb c) {
  RgbImage img(dims);
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) img.set(x, y, c);
  }
  return img;
}

// Every label forms exactly one 4-connected region.
bool labels_connected(const Grid<int>& a, int count) {
  const int h = int(a.rows()), w = int(a.cols());
  Bitmap seen = Bitmap::Constant(h, w, false);
  std::vector<int> pieces(std::size_t(count), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (seen(y, x)) continue;
      const int l = a(y, x);
      ++pieces[std::size_t(l)];
      std::queue<std::pair<int, int>> q;
      q.push({x, y});
      seen(y, x) = true;
      while (!q.empty()) {
        auto [cx, cy] = q.front();
        q.pop();
        const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = cx + dx[k], ny = cy + dy[k];
          if (nx < 0 || ny < 0 || nx >= w || ny >= h || seen(ny, nx) || a(ny, nx) != l) continue;
          seen(ny, nx) = true;
          q.push({nx, ny});
        }
      }
    }
  }
  for (int p : pieces) {
    if (p != 1) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("K = 1 gives one superpixel") {
  std::mt19937_64 gen(1);
  const SuperpixelMap sp = slic_segment(testing::random_image(ImageDims(20, 15), gen), {1, 10, 10});
  CHECK(sp.count == 1);
  CHECK((sp.assignment == 0).all());
}

TEST_CASE("uniform image, K = 4: balanced quadrants") {
  const SuperpixelMap sp = slic_segment(uniform_image(ImageDims(64, 64), {90, 120, 30}), {4, 10, 10});
  REQUIRE(sp.count == 4);
  for (int i = 0; i < 4; ++i) {
    const auto area = double((sp.assignment == i).count());
    CHECK(area >= 1024 * 0.85);
    CHECK(area <= 1024 * 1.15);
  }
}

TEST_CASE("partition, connectivity and count bound on fuzzed images") {
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 40; ++trial) {
    const ImageDims dims(testing::uniform_int(gen, 1, 48), testing::uniform_int(gen, 1, 48));
    const RgbImage img = trial % 2 ? testing::random_image(dims, gen) : testing::blocky_image(dims, gen);
    const SlicConfig cfg{testing::uniform_int(gen, 1, 80), 10.0, 5};
    const SuperpixelMap sp = slic_segment(img, cfg);
    CAPTURE(dims.width);
    CAPTURE(dims.height);
    CAPTURE(cfg.superpixels);
    REQUIRE(sp.count >= 1);
    CHECK(sp.count <= cfg.superpixels);
    CHECK(sp.assignment.minCoeff() == 0);
    CHECK(sp.assignment.maxCoeff() == sp.count - 1);
    std::set<int> used(sp.assignment.data(), sp.assignment.data() + sp.assignment.size());
    CHECK(int(used.size()) == sp.count);
    CHECK(labels_connected(sp.assignment, sp.count));
    std::size_t total = 0;
    for (auto a : sp.areas) total += a;
    CHECK(total == dims.pixel_count());
  }
}

TEST_CASE("slic is deterministic") {
  std::mt19937_64 gen(4);
  const RgbImage img = testing::blocky_image(ImageDims(40, 30), gen);
  CHECK((slic_segment(img).assignment == slic_segment(img).assignment).all());
}

TEST_CASE("propagation inside a labeled superpixel") {
  std::mt19937_64 gen(8);
  const RgbImage img = testing::blocky_image(ImageDims(32, 32), gen);
  const SuperpixelMap sp = slic_segment(img, {16, 10, 10});
  REQUIRE(sp.count > 3);
  PixelCoord inside{-1, -1};
  for (int y = 0; y < 32 && inside.x < 0; ++y) {
    for (int x = 0; x < 32; ++x) {
      if (sp.assignment(y, x) == 3) {
        inside = {x, y};
        break;
      }
    }
  }
  PointLabelSet one;
  one.add(inside, 2);
  const LabelMap m = propagate_point_labels(sp, one);
  CHECK(m.sentinel_count() == 0);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      if (sp.assignment(y, x) == 3) REQUIRE(m({x, y}) == 2);
    }
  }
  CHECK_THROWS_AS(propagate_point_labels(sp, PointLabelSet{}), Error);
}

TEST_CASE("majority label within a superpixel") {
  const SuperpixelMap sp = slic_segment(uniform_image(ImageDims(10, 10), {1, 2, 3}), {1, 10, 10});
  PointLabelSet pts;
  pts.add({1, 1}, 1);
  pts.add({5, 5}, 0);
  pts.add({8, 2}, 1);
  CHECK((propagate_point_labels(sp, pts).data() == 1).all());

  PointLabelSet tie;
  tie.add({1, 1}, 4);
  tie.add({5, 5}, 2);
  CHECK((propagate_point_labels(sp, tie).data() == 4).all());
}

TEST_CASE("unlabeled superpixels copy the nearest labeled one in feature space") {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 20; ++trial) {
    const ImageDims dims(8, 8);
    const RgbImage img = testing::random_image(dims, gen);
    const SuperpixelMap sp = slic_segment(img, {4, 10, 10});
    REQUIRE(sp.count >= 2);
    PointLabelSet pts;
    while (pts.size() < 2) {
      const PixelCoord p{testing::uniform_int(gen, 0, 7), testing::uniform_int(gen, 0, 7)};
      if (!pts.contains(p)) pts.add(p, ClassId(pts.size() + 1));
    }

    // Independent features: per-superpixel mean (L, a, b, x, y).
    const LabImage lab = to_lab(img);
    std::vector<std::array<double, 5>> mean(std::size_t(sp.count), {0, 0, 0, 0, 0});
    std::vector<double> n(std::size_t(sp.count), 0);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        auto& f = mean[std::size_t(sp.assignment(y, x))];
        f[0] += lab.L(y, x);
        f[1] += lab.a(y, x);
        f[2] += lab.b(y, x);
        f[3] += x;
        f[4] += y;
        n[std::size_t(sp.assignment(y, x))] += 1;
      }
    }
    for (int i = 0; i < sp.count; ++i) {
      for (auto& v : mean[std::size_t(i)]) v /= n[std::size_t(i)];
    }
    const double w = sp.compactness / sp.step;
    auto d2 = [&](int i, int j) {
      const auto& a = mean[std::size_t(i)];
      const auto& b = mean[std::size_t(j)];
      double c = 0, s = 0;
      for (int k = 0; k < 3; ++k) c += (a[std::size_t(k)] - b[std::size_t(k)]) * (a[std::size_t(k)] - b[std::size_t(k)]);
      for (int k = 3; k < 5; ++k) s += (a[std::size_t(k)] - b[std::size_t(k)]) * (a[std::size_t(k)] - b[std::size_t(k)]);
      return c + w * w * s;
    };
    // Majority over the points in each superpixel (one or two points, so the earliest wins ties).
    std::map<int, ClassId> seeded;
    for (const PointLabel& p : pts) seeded.emplace(sp.assignment(p.point.y, p.point.x), p.label);

    const LabelMap got = propagate_point_labels(sp, pts);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        const int s = sp.assignment(y, x);
        ClassId expect;
        if (seeded.count(s)) {
          expect = seeded[s];
        } else {
          int best = -1;
          for (const auto& [id, label] : seeded) {
            if (best < 0 || d2(s, id) < d2(s, best) - 1e-9) best = id;
          }
          expect = seeded[best];
        }
        REQUIRE(got({x, y}) == expect);
      }
    }
  }
}
