#include "sparseseg/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "json.hpp"

namespace sparseseg {

namespace {

[[noreturn]] void parse_error(const std::string& message) {
  throw Error(ErrorKind::ManifestParseError, message);
}

// Declared centroids may be rounded to six significant digits.
bool centroid_matches(double declared, double actual) {
  return std::abs(declared - actual) <= std::max(1e-6, 5e-6 * std::abs(actual));
}

class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(std::size_t(n)) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int i) {
    while (parent_[std::size_t(i)] != i) {
      parent_[std::size_t(i)] = parent_[std::size_t(parent_[std::size_t(i)])];
      i = parent_[std::size_t(i)];
    }
    return i;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::size_t(std::max(a, b))] = std::min(a, b);
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

std::string_view to_string(ProviderMode mode) {
  return mode == ProviderMode::File ? "file" : "fallback";
}

CandidateMask make_candidate(int id, Bitmap bitmap, double quality) {
  CandidateMask c;
  c.id = id;
  const AreaCentroid ac = mask_area_centroid(bitmap);
  c.area = ac.area;
  c.cx = ac.cx;
  c.cy = ac.cy;
  c.quality = quality;
  c.bbox = bounding_box(bitmap);
  c.bitmap = std::make_shared<const Bitmap>(std::move(bitmap));
  return c;
}

ProposalSet::ProposalSet(ImageDims d, std::vector<CandidateMask> m)
    : dims(d), masks(std::move(m)), coverage(Bitmap::Constant(d.height, d.width, false)) {
  for (const CandidateMask& mask : masks) {
    if (ImageDims::of(*mask.bitmap) != dims) {
      throw Error(ErrorKind::DimsMismatch, "mask " + std::to_string(mask.id) + " dims differ from image");
    }
    coverage = coverage || *mask.bitmap;
  }
}

ProposalSet parse_manifest(std::string_view text, std::optional<ImageDims> expected) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    parse_error(e.what());
  }
  ImageDims dims;
  std::vector<CandidateMask> masks;
  try {
    dims = ImageDims(doc.at("width").get<int>(), doc.at("height").get<int>());
    if (expected && *expected != dims) {
      throw Error(ErrorKind::DimsMismatch,
                  "manifest is " + std::to_string(dims.width) + "x" + std::to_string(dims.height) +
                      ", image is " + std::to_string(expected->width) + "x" +
                      std::to_string(expected->height));
    }
    for (const auto& entry : doc.at("masks")) {
      const int id = entry.at("id").get<int>();
      RleMask rle{dims, {}};
      for (const auto& c : entry.at("rle")) {
        const auto v = c.get<std::int64_t>();
        if (v < 0) parse_error("negative run length in mask " + std::to_string(id));
        rle.counts.push_back(std::uint32_t(v));
      }
      Bitmap bitmap;
      try {
        bitmap = rle_decode(rle);
      } catch (const Error& e) {
        throw Error(ErrorKind::DimsMismatch, "mask " + std::to_string(id) + ": " + e.what());
      }
      const double quality = entry.value("quality", 1.0);
      if (!(quality >= 0.0 && quality <= 1.0)) parse_error("quality outside [0,1] in mask " + std::to_string(id));
      if (!bitmap.any()) {
        throw Error(ErrorKind::InconsistentMetadata, "mask " + std::to_string(id) + " is empty");
      }
      CandidateMask mask = make_candidate(id, std::move(bitmap), quality);
      const auto area = entry.at("area").get<std::int64_t>();
      if (area != std::int64_t(mask.area)) {
        throw Error(ErrorKind::InconsistentMetadata,
                    "mask " + std::to_string(id) + " declares area " + std::to_string(area) +
                        ", decoded " + std::to_string(mask.area));
      }
      const auto centroid = entry.at("centroid").get<std::array<double, 2>>();
      if (!centroid_matches(centroid[0], mask.cx) || !centroid_matches(centroid[1], mask.cy)) {
        throw Error(ErrorKind::InconsistentMetadata, "mask " + std::to_string(id) + " centroid mismatch");
      }
      masks.push_back(std::move(mask));
    }
  } catch (const nlohmann::json::exception& e) {
    parse_error(e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidArgument) parse_error(e.what());
    throw;
  }
  return ProposalSet(dims, std::move(masks));
}

ProposalSet load_proposals(const std::filesystem::path& manifest, std::optional<ImageDims> expected) {
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw Error(ErrorKind::ManifestParseError, "cannot open " + manifest.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_manifest(text, expected);
}

std::string format_manifest(const ProposalSet& proposals) {
  nlohmann::json doc;
  doc["width"] = proposals.dims.width;
  doc["height"] = proposals.dims.height;
  doc["masks"] = nlohmann::json::array();
  for (const CandidateMask& m : proposals.masks) {
    doc["masks"].push_back({{"id", m.id},
                            {"area", m.area},
                            {"centroid", {m.cx, m.cy}},
                            {"quality", m.quality},
                            {"rle", m.rle().counts}});
  }
  return doc.dump() + "\n";
}

const CandidateMask* point_prompt(const ProposalSet& proposals, PixelCoord p) {
  const CandidateMask* best = nullptr;
  for (const CandidateMask& m : proposals.masks) {
    if (!m.contains(p)) continue;
    if (!best || m.quality > best->quality ||
        (m.quality == best->quality &&
         (m.area < best->area || (m.area == best->area && m.id < best->id)))) {
      best = &m;
    }
  }
  return best;
}

std::vector<PixelCoord> coverage_complement(const ProposalSet& proposals) {
  std::vector<PixelCoord> out;
  for (int y = 0; y < proposals.dims.height; ++y) {
    for (int x = 0; x < proposals.dims.width; ++x) {
      if (!proposals.coverage(y, x)) out.push_back({x, y});
    }
  }
  return out;
}

std::size_t FallbackConfig::effective_min_area(ImageDims dims) const {
  if (min_area) return *min_area;
  return std::max<std::size_t>(64, std::size_t(std::ceil(0.003 * double(dims.pixel_count()))));
}

ProposalSet generate_fallback_proposals(const RgbImage& image, const FallbackConfig& config) {
  const ImageDims dims = image.dims();
  const LabImage lab = to_lab(image);
  const SuperpixelMap sp =
      slic_segment(lab, {config.superpixels, config.compactness, config.iterations});

  DisjointSets sets(sp.count);
  auto try_merge = [&](int a, int b) {
    if (a == b) return;
    const double d2 = (sp.features.row(a).head<3>() - sp.features.row(b).head<3>()).squaredNorm();
    if (d2 < config.merge_threshold * config.merge_threshold) sets.unite(a, b);
  };
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      const int k = sp.assignment(y, x);
      if (x + 1 < dims.width) try_merge(k, sp.assignment(y, x + 1));
      if (y + 1 < dims.height) try_merge(k, sp.assignment(y + 1, x));
    }
  }

  // Components numbered in row-major order of their first pixel.
  std::map<int, int> component_of_root;
  Grid<int> component(dims.height, dims.width);
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      const int root = sets.find(sp.assignment(y, x));
      auto [it, inserted] = component_of_root.emplace(root, int(component_of_root.size()));
      component(y, x) = it->second;
    }
  }
  const std::size_t ncomp = component_of_root.size();
  std::vector<std::size_t> area(ncomp, 0);
  std::vector<Eigen::Vector3d> sum(ncomp, Eigen::Vector3d::Zero());
  std::vector<double> sum_sq(ncomp, 0.0);
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      const auto c = std::size_t(component(y, x));
      const Eigen::Vector3d v(lab.L(y, x), lab.a(y, x), lab.b(y, x));
      ++area[c];
      sum[c] += v;
      sum_sq[c] += v.squaredNorm();
    }
  }

  const std::size_t min_area = config.effective_min_area(dims);
  std::vector<CandidateMask> masks;
  for (std::size_t c = 0; c < ncomp; ++c) {
    if (area[c] < min_area) continue;
    const double n = double(area[c]);
    const double variance = std::max(0.0, sum_sq[c] / n - (sum[c] / n).squaredNorm());
    const double quality = std::clamp(1.0 / (1.0 + variance), 0.0, 1.0);
    masks.push_back(make_candidate(int(masks.size()), Bitmap(component == int(c)), quality));
  }
  return ProposalSet(dims, std::move(masks));
}

}  // namespace sparseseg
