#pragma once

// Point-label augmentation: every labeled point is expanded into a proposal
// mask, overlapping masks are reconciled per pixel, and pixels no mask
// reaches are filled by superpixel propagation.
//
// For a pixel p covered by the masks S_p, let O_p be the intersection of those
// masks and c_p its centroid. Each mask i in S_p scores
//
//   Score(p, i) = sum over labeled points p_j in O_p with l_j = l_i of 1 / (1 + |p_j - c_p|)
//
// and p takes the label of the best-scoring mask.

#include <optional>
#include <span>
#include <vector>

#include "sparseseg/proposals.hpp"
#include "sparseseg/raster.hpp"
#include "sparseseg/superpixels.hpp"

namespace sparseseg {

struct ExpandedMask {
  PointLabel source;
  std::optional<CandidateMask> mask;  // empty when no proposal contains the point
};

struct PartialSegmentation {
  LabelMap map;     // kUnlabeled where no expanded mask reaches
  Bitmap covered;
};

// Throws EmptyPointSet.
std::vector<ExpandedMask> expand_points(const PointLabelSet& points, const ProposalProvider& provider);

// Label for a pixel with mask signature `signature` (indices into `expanded`,
// ascending). The result depends only on the signature. Throws EmptyOverlap if
// the masks do not intersect, InvalidArgument for an empty signature.
ClassId resolve_signature(std::span<const int> signature, std::span<const ExpandedMask> expanded,
                          const PointLabelSet& points);

// Same as resolve_signature, additionally checking that p lies in every mask.
ClassId resolve_pixel_label(PixelCoord p, std::span<const int> signature,
                            std::span<const ExpandedMask> expanded, const PointLabelSet& points);

PartialSegmentation merge_masks(std::span<const ExpandedMask> expanded, const PointLabelSet& points,
                                ImageDims dims);

// Covered pixels from `partial`, the rest from `fill`, then every queried point
// forced to its own label. Throws IncompleteFill if `fill` has unlabeled pixels.
LabelMap compose_final(const PartialSegmentation& partial, const LabelMap& fill,
                       const PointLabelSet& points);

// Full pipeline. The superpixel overload lets callers reuse one segmentation
// across many point sets on the same image.
LabelMap augment(const RgbImage& image, const PointLabelSet& points, const ProposalProvider& provider,
                 const SlicConfig& superpixels = {});
LabelMap augment(const SuperpixelMap& superpixels, const PointLabelSet& points,
                 const ProposalProvider& provider);

}  // namespace sparseseg
