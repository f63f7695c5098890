#pragma once

// Point selection: static strategies (random, grid, centroid-guided) and the
// acquisition-driven dynamic strategies.
//
// The dynamic sampler scores every pixel with
//
//   A(p) = lambda * O(p) + (1 - lambda) * E(p)
//
// where O is the area-weighted closeness to candidate-mask centroids and E
// the normalised distance to the nearest already-queried point. Both are
// fields in [0, 1] over the whole image.

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sparseseg/proposals.hpp"
#include "sparseseg/raster.hpp"

namespace sparseseg {

template <typename Scalar = double>
using ScalarField = Grid<Scalar>;

// ----------------------------------------------------------------------------
// Acquisition fields

namespace detail {

template <typename Scalar>
ScalarField<Scalar> distance_to(ImageDims dims, Scalar cx, Scalar cy) {
  using Row = Eigen::Array<Scalar, 1, Eigen::Dynamic>;
  using Col = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  const Row dx2 = (Row::LinSpaced(dims.width, Scalar(0), Scalar(dims.width - 1)) - cx).square();
  const Col dy2 = (Col::LinSpaced(dims.height, Scalar(0), Scalar(dims.height - 1)) - cy).square();
  return (dx2.replicate(dims.height, 1) + dy2.replicate(1, dims.width)).sqrt();
}

}  // namespace detail

// Area-weighted centroid proximity. Zero everywhere when there are no masks.
template <typename Scalar = double>
ScalarField<Scalar> object_proximity(const ProposalSet& proposals, ImageDims dims) {
  ScalarField<Scalar> field = ScalarField<Scalar>::Zero(dims.height, dims.width);
  if (proposals.masks.empty()) return field;
  const Scalar dmax = Scalar(dims.diagonal());
  Scalar total_area = 0;
  for (const CandidateMask& m : proposals.masks) {
    const Scalar area = Scalar(m.area);
    field += area * (Scalar(1) - detail::distance_to(dims, Scalar(m.cx), Scalar(m.cy)) / dmax);
    total_area += area;
  }
  return field / total_area;
}

// E'(p) = min(E(p), |p - q| / d_max) after querying q.
template <typename Scalar, typename Derived>
void update_exploration(Eigen::ArrayBase<Derived>& field, bool& empty, PixelCoord q, ImageDims dims) {
  const ScalarField<Scalar> d = detail::distance_to(dims, Scalar(q.x), Scalar(q.y)) / Scalar(dims.diagonal());
  if (empty) {
    field = d;
    empty = false;
  } else {
    field = field.min(d);
  }
}

// Normalised distance to the nearest queried point; zero when none were queried.
template <typename Scalar = double>
ScalarField<Scalar> exploration(std::span<const PixelCoord> queried, ImageDims dims) {
  ScalarField<Scalar> field = ScalarField<Scalar>::Zero(dims.height, dims.width);
  bool empty = true;
  for (PixelCoord q : queried) update_exploration<Scalar>(field, empty, q, dims);
  return field;
}

template <typename Scalar = double>
ScalarField<Scalar> exploration(const PointLabelSet& queried, ImageDims dims) {
  std::vector<PixelCoord> points;
  for (const PointLabel& p : queried) points.push_back(p.point);
  return exploration<Scalar>(std::span<const PixelCoord>(points), dims);
}

// Lazy lambda * O + (1 - lambda) * E. Throws DimsMismatch.
template <typename DerivedO, typename DerivedE>
auto acquisition_map(const Eigen::ArrayBase<DerivedO>& proximity,
                     const Eigen::ArrayBase<DerivedE>& explore,
                     typename DerivedO::Scalar lambda) {
  if (proximity.rows() != explore.rows() || proximity.cols() != explore.cols()) {
    throw Error(ErrorKind::DimsMismatch, "acquisition fields differ in size");
  }
  using Scalar = typename DerivedO::Scalar;
  return lambda * proximity.derived() + (Scalar(1) - lambda) * explore.derived();
}

// Highest score over unselected pixels; the first in row-major order wins ties.
// Throws ImageExhausted when every pixel is selected.
template <typename Derived>
PixelCoord argmax_unselected(const Eigen::ArrayBase<Derived>& score, const Bitmap& selected) {
  using Scalar = typename Derived::Scalar;
  Scalar best = -std::numeric_limits<Scalar>::infinity();
  PixelCoord arg{-1, -1};
  for (Eigen::Index y = 0; y < score.rows(); ++y) {
    for (Eigen::Index x = 0; x < score.cols(); ++x) {
      if (selected(y, x)) continue;
      const Scalar v = score(y, x);
      if (v > best) {
        best = v;
        arg = {int(x), int(y)};
      }
    }
  }
  if (arg.x < 0) throw Error(ErrorKind::ImageExhausted, "every pixel is already selected");
  return arg;
}

// ----------------------------------------------------------------------------
// Random numbers

// std::mt19937_64 output is fixed by the C++ standard; bounded draws use
// rejection sampling so sequences reproduce across platforms.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64+rejection";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return double(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

 private:
  std::mt19937_64 engine_;
};

// Partial Fisher-Yates: the first k entries of a uniform random permutation.
std::vector<PixelCoord> draw_without_replacement(std::vector<PixelCoord> candidates, std::size_t k,
                                                 Rng& rng);

// ----------------------------------------------------------------------------
// Strategies

enum class Strategy { Random, Grid, Centroid, DynamicOnlyA, Dynamic };

std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);
bool needs_proposals(Strategy s);

struct SamplerConfig {
  double lambda = 0.5;
  double random_ratio = 0.5;
  int budget = 30;
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::Dynamic;

  void validate() const;
  // Points chosen by the acquisition function: ceil(n * (1 - ratio)), or n for
  // dynamic_only_a.
  int active_budget() const;
};

// Throws ImageExhausted when n > W·H.
std::vector<PixelCoord> sample_random(ImageDims dims, std::size_t n, Rng& rng);
std::vector<PixelCoord> sample_grid(ImageDims dims, std::size_t n);
std::vector<PixelCoord> sample_centroid_guided(const ProposalSet& proposals, ImageDims dims,
                                               std::size_t n, Rng& rng);

enum class Phase { Active, Background, Done };
std::string_view to_string(Phase p);

// State of one dynamic sampling run. O is computed once on construction;
// E is maintained incrementally as active points are committed.
class SamplerState {
 public:
  SamplerState(const SamplerConfig& config, std::shared_ptr<const ProposalSet> proposals);

  const SamplerConfig& config() const { return config_; }
  const ProposalSet& proposals() const { return *proposals_; }
  ImageDims dims() const { return proposals_->dims; }
  Phase phase() const { return phase_; }
  int active_budget() const { return active_budget_; }
  const ScalarField<double>& object_proximity() const { return proximity_; }
  const ScalarField<double>& exploration() const { return exploration_; }
  const PointLabelSet& selected() const { return selected_; }
  bool is_selected(PixelCoord p) const { return selected_mask_(p.y, p.x); }

  // Argmax of A over unselected pixels, row-major tie-break. Does not commit.
  // Throws BudgetExhausted outside the active phase.
  PixelCoord select_next_active_point() const;

  // Records a queried point; updates E during the active phase and advances
  // the phase once its quota is reached. Throws BudgetExhausted when done,
  // InvalidArgument for an out-of-bounds or already selected pixel.
  void commit(PixelCoord p, ClassId label);

 private:
  SamplerConfig config_;
  std::shared_ptr<const ProposalSet> proposals_;
  int active_budget_;
  ScalarField<double> proximity_;
  ScalarField<double> exploration_;
  bool exploration_empty_ = true;
  PointLabelSet selected_;
  Bitmap selected_mask_;
  Phase phase_ = Phase::Active;
};

// k uniform draws without replacement from the uncovered, unselected pixels;
// when that pool is too small the rest comes from the other unselected pixels.
// Throws ImageExhausted when k exceeds the unselected pixel count.
std::vector<PixelCoord> sample_background_points(const SamplerState& state, std::size_t k, Rng& rng);

using Annotator = std::function<ClassId(PixelCoord)>;

struct Suggestion {
  PixelCoord point;
  Phase phase = Phase::Active;
};

// Sequential suggest/commit loop over every strategy. The same object drives
// batch sampling and the interactive service, so both produce identical point
// sequences for identical seeds. Committed points may differ from the
// suggestion (free annotation); later suggestions then skip taken pixels.
class PointSuggester {
 public:
  // `proposals` may be null for random and grid.
  PointSuggester(const SamplerConfig& config, ImageDims dims,
                 std::shared_ptr<const ProposalSet> proposals);

  const SamplerConfig& config() const { return config_; }
  int budget() const { return config_.budget; }
  bool done() const { return int(selected().size()) >= config_.budget; }
  Phase phase() const;
  const PointLabelSet& selected() const;
  const SamplerState* dynamic_state() const { return state_ ? &*state_ : nullptr; }

  // Pending suggestion; stable until the next commit. Throws BudgetExhausted.
  Suggestion suggest();
  void commit(PixelCoord p, ClassId label);

 private:
  std::optional<PixelCoord> next_from_plan();

  SamplerConfig config_;
  ImageDims dims_;
  Rng rng_;
  std::optional<SamplerState> state_;  // dynamic strategies
  PointLabelSet static_selected_;
  Bitmap static_mask_;
  std::vector<PixelCoord> plan_;
  std::size_t plan_cursor_ = 0;
  std::optional<Suggestion> pending_;
};

// Runs a whole strategy with the annotator answering each query in turn.
PointLabelSet sample_points(const SamplerConfig& config, ImageDims dims,
                            std::shared_ptr<const ProposalSet> proposals, const Annotator& annotator);

// Dynamic strategies only; throws InvalidArgument otherwise.
PointLabelSet run_dynamic_sampling(const SamplerConfig& config,
                                   std::shared_ptr<const ProposalSet> proposals,
                                   const Annotator& annotator);

}  // namespace sparseseg
