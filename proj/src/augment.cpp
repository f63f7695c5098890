#include "sparseseg/augment.hpp"

#include <limits>
#include <map>

namespace sparseseg {

std::vector<ExpandedMask> expand_points(const PointLabelSet& points, const ProposalProvider& provider) {
  if (points.empty()) throw Error(ErrorKind::EmptyPointSet, "no point labels to expand");
  std::vector<ExpandedMask> out;
  out.reserve(points.size());
  for (const PointLabel& p : points) {
    ExpandedMask e{p, std::nullopt};
    if (const CandidateMask* m = provider.prompt(p.point)) e.mask = *m;
    out.push_back(std::move(e));
  }
  return out;
}

ClassId resolve_signature(std::span<const int> signature, std::span<const ExpandedMask> expanded,
                          const PointLabelSet& points) {
  if (signature.empty()) throw Error(ErrorKind::InvalidArgument, "empty mask signature");
  auto mask_of = [&](int i) -> const CandidateMask& { return *expanded[std::size_t(i)].mask; };
  if (signature.size() == 1) return expanded[std::size_t(signature[0])].source.label;

  BoundingBox box = mask_of(signature[0]).bbox;
  for (int i : signature) box = box.intersect(mask_of(i).bbox);
  auto in_overlap = [&](int x, int y) {
    for (int i : signature) {
      if (!(*mask_of(i).bitmap)(y, x)) return false;
    }
    return true;
  };
  std::size_t area = 0;
  double sx = 0.0, sy = 0.0;
  for (int y = box.y0; y <= box.y1; ++y) {
    for (int x = box.x0; x <= box.x1; ++x) {
      if (!in_overlap(x, y)) continue;
      ++area;
      sx += x;
      sy += y;
    }
  }
  if (area == 0) throw Error(ErrorKind::EmptyOverlap, "masks in the signature do not intersect");
  const double cx = sx / double(area), cy = sy / double(area);

  // Per-label support from labeled points inside the overlap.
  std::array<double, 256> support{};
  for (const PointLabel& p : points) {
    if (p.point.x < box.x0 || p.point.x > box.x1 || p.point.y < box.y0 || p.point.y > box.y1) continue;
    if (!in_overlap(p.point.x, p.point.y)) continue;
    support[p.label] += 1.0 / (1.0 + distance(p.point, cx, cy));
  }

  // Ties: smaller mask area, then lower mask index.
  auto better_tiebreak = [&](int a, int b) {
    const std::size_t area_a = mask_of(a).area, area_b = mask_of(b).area;
    return area_a != area_b ? area_a < area_b : a < b;
  };
  int best = -1;
  double best_score = -1.0;
  for (int i : signature) {
    const double s = support[expanded[std::size_t(i)].source.label];
    if (s > best_score || (s == best_score && better_tiebreak(i, best))) {
      best = i;
      best_score = s;
    }
  }
  if (best_score > 0.0) return expanded[std::size_t(best)].source.label;

  // No support anywhere: the mask whose source point is nearest to c_p.
  best = -1;
  double best_distance = std::numeric_limits<double>::infinity();
  for (int i : signature) {
    const double d = distance(expanded[std::size_t(i)].source.point, cx, cy);
    if (d < best_distance || (d == best_distance && better_tiebreak(i, best))) {
      best = i;
      best_distance = d;
    }
  }
  return expanded[std::size_t(best)].source.label;
}

ClassId resolve_pixel_label(PixelCoord p, std::span<const int> signature,
                            std::span<const ExpandedMask> expanded, const PointLabelSet& points) {
  for (int i : signature) {
    const auto& m = expanded[std::size_t(i)].mask;
    if (!m || !m->contains(p)) {
      throw Error(ErrorKind::EmptyOverlap, "pixel is not inside every mask of its signature");
    }
  }
  return resolve_signature(signature, expanded, points);
}

PartialSegmentation merge_masks(std::span<const ExpandedMask> expanded, const PointLabelSet& points,
                                ImageDims dims) {
  PartialSegmentation out{LabelMap(dims), Bitmap::Constant(dims.height, dims.width, false)};
  Grid<int> count = Grid<int>::Zero(dims.height, dims.width);
  Grid<int> first = Grid<int>::Constant(dims.height, dims.width, -1);
  for (std::size_t i = 0; i < expanded.size(); ++i) {
    const auto& m = expanded[i].mask;
    if (!m) continue;
    if (ImageDims::of(*m->bitmap) != dims) throw Error(ErrorKind::DimsMismatch, "mask dims differ");
    for (int y = m->bbox.y0; y <= m->bbox.y1; ++y) {
      for (int x = m->bbox.x0; x <= m->bbox.x1; ++x) {
        if (!(*m->bitmap)(y, x)) continue;
        if (count(y, x)++ == 0) first(y, x) = int(i);
      }
    }
  }

  // Pixels sharing a signature share a label.
  std::map<std::vector<int>, ClassId> resolved;
  std::vector<int> signature;
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      const int c = count(y, x);
      if (c == 0) continue;
      out.covered(y, x) = true;
      if (c == 1) {
        out.map({x, y}) = expanded[std::size_t(first(y, x))].source.label;
        continue;
      }
      signature.clear();
      for (std::size_t i = std::size_t(first(y, x)); i < expanded.size(); ++i) {
        const auto& m = expanded[i].mask;
        if (m && m->contains({x, y})) signature.push_back(int(i));
      }
      auto it = resolved.find(signature);
      if (it == resolved.end()) {
        it = resolved.emplace(signature, resolve_signature(signature, expanded, points)).first;
      }
      out.map({x, y}) = it->second;
    }
  }
  return out;
}

LabelMap compose_final(const PartialSegmentation& partial, const LabelMap& fill,
                       const PointLabelSet& points) {
  if (fill.dims() != partial.map.dims()) throw Error(ErrorKind::DimsMismatch, "fill dims differ");
  if (fill.sentinel_count() != 0) throw Error(ErrorKind::IncompleteFill, "fill map has unlabeled pixels");
  LabelMap out(partial.covered.select(partial.map.data(), fill.data()));
  for (const PointLabel& p : points) out(p.point) = p.label;
  return out;
}

LabelMap augment(const RgbImage& image, const PointLabelSet& points, const ProposalProvider& provider,
                 const SlicConfig& superpixels) {
  if (points.empty()) throw Error(ErrorKind::EmptyPointSet, "no point labels to augment");
  return augment(slic_segment(image, superpixels), points, provider);
}

LabelMap augment(const SuperpixelMap& superpixels, const PointLabelSet& points,
                 const ProposalProvider& provider) {
  const ImageDims dims = superpixels.dims();
  if (provider.proposals().dims != dims) {
    throw Error(ErrorKind::DimsMismatch, "proposal dims differ from image dims");
  }
  const std::vector<ExpandedMask> expanded = expand_points(points, provider);
  const PartialSegmentation partial = merge_masks(expanded, points, dims);
  const LabelMap fill = propagate_point_labels(superpixels, points);
  return compose_final(partial, fill, points);
}

}  // namespace sparseseg
