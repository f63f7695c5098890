#pragma once

// Candidate object masks: loaded from a JSON manifest (exported from an
// automatic mask generator) or produced by the built-in superpixel fallback.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sparseseg/raster.hpp"
#include "sparseseg/superpixels.hpp"

namespace sparseseg {

struct CandidateMask {
  int id = 0;
  std::shared_ptr<const Bitmap> bitmap;
  std::size_t area = 0;
  double cx = 0.0, cy = 0.0;
  double quality = 0.0;
  BoundingBox bbox;

  bool contains(PixelCoord p) const { return (*bitmap)(p.y, p.x); }
  RleMask rle() const { return rle_encode(*bitmap); }
};

// Builds a candidate from a bitmap, computing area, centroid and bounding box.
CandidateMask make_candidate(int id, Bitmap bitmap, double quality);

struct ProposalSet {
  ImageDims dims;
  std::vector<CandidateMask> masks;
  Bitmap coverage;  // union of all masks

  ProposalSet() = default;
  ProposalSet(ImageDims dims, std::vector<CandidateMask> masks);

  std::size_t covered_pixels() const { return std::size_t(coverage.count()); }
};

// Manifest: {width, height, masks: [{id, area, centroid: [x, y], quality, rle: [...]}]}.
// Validates declared area (exact) and centroid (1e-6, or 5e-6 relative) against the decoded mask.
// Throws ManifestParseError, DimsMismatch or InconsistentMetadata.
ProposalSet parse_manifest(std::string_view json, std::optional<ImageDims> expected = std::nullopt);
ProposalSet load_proposals(const std::filesystem::path& manifest,
                           std::optional<ImageDims> expected = std::nullopt);
std::string format_manifest(const ProposalSet& proposals);

// Highest-quality mask containing p; ties prefer smaller area, then lower id.
const CandidateMask* point_prompt(const ProposalSet& proposals, PixelCoord p);

// Uncovered pixels in row-major order.
std::vector<PixelCoord> coverage_complement(const ProposalSet& proposals);

struct FallbackConfig {
  int superpixels = 64;         // K_gen
  double merge_threshold = 10;  // mean-Lab distance below which neighbours merge
  std::optional<std::size_t> min_area;  // default max(64, 0.003·W·H)
  double compactness = 10.0;
  int iterations = 10;

  std::size_t effective_min_area(ImageDims dims) const;
};

ProposalSet generate_fallback_proposals(const RgbImage& image, const FallbackConfig& config = {});

enum class ProviderMode { File, Fallback };

std::string_view to_string(ProviderMode mode);

class ProposalProvider {
 public:
  virtual ~ProposalProvider() = default;

  virtual ProviderMode mode() const = 0;
  virtual const ProposalSet& proposals() const = 0;

  const CandidateMask* prompt(PixelCoord p) const { return point_prompt(proposals(), p); }
};

class FileProposalProvider final : public ProposalProvider {
 public:
  explicit FileProposalProvider(ProposalSet proposals) : proposals_(std::move(proposals)) {}
  static FileProposalProvider load(const std::filesystem::path& manifest, ImageDims expected) {
    return FileProposalProvider(load_proposals(manifest, expected));
  }

  ProviderMode mode() const override { return ProviderMode::File; }
  const ProposalSet& proposals() const override { return proposals_; }

 private:
  ProposalSet proposals_;
};

class FallbackProposalProvider final : public ProposalProvider {
 public:
  FallbackProposalProvider(const RgbImage& image, const FallbackConfig& config = {})
      : proposals_(generate_fallback_proposals(image, config)) {}

  ProviderMode mode() const override { return ProviderMode::Fallback; }
  const ProposalSet& proposals() const override { return proposals_; }

 private:
  ProposalSet proposals_;
};

}  // namespace sparseseg
