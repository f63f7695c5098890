#include "sparseseg/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sparseseg {

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "uniform_index over an empty range");
  const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
  std::uint64_t r = engine_();
  while (r < threshold) r = engine_();
  return r % n;
}

std::vector<PixelCoord> draw_without_replacement(std::vector<PixelCoord> candidates, std::size_t k,
                                                 Rng& rng) {
  if (k > candidates.size()) {
    throw Error(ErrorKind::ImageExhausted, "cannot draw " + std::to_string(k) + " of " +
                                               std::to_string(candidates.size()) + " pixels");
  }
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + std::size_t(rng.uniform_index(candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(k);
  return candidates;
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Random: return "random";
    case Strategy::Grid: return "grid";
    case Strategy::Centroid: return "centroid";
    case Strategy::DynamicOnlyA: return "dynamic_only_a";
    case Strategy::Dynamic: return "dynamic";
  }
  return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (Strategy s : {Strategy::Random, Strategy::Grid, Strategy::Centroid, Strategy::DynamicOnlyA,
                     Strategy::Dynamic}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

bool needs_proposals(Strategy s) {
  return s == Strategy::Centroid || s == Strategy::DynamicOnlyA || s == Strategy::Dynamic;
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Active: return "active";
    case Phase::Background: return "background";
    case Phase::Done: return "done";
  }
  return "unknown";
}

void SamplerConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorKind::InvalidArgument, "lambda must lie in [0,1]");
  if (!(random_ratio >= 0.0 && random_ratio <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "random_ratio must lie in [0,1]");
  }
  if (budget < 1) throw Error(ErrorKind::InvalidArgument, "budget must be positive");
}

int SamplerConfig::active_budget() const {
  if (strategy == Strategy::DynamicOnlyA) return budget;
  // Guard against 30 * (1 - 0.5) landing a hair above an integer.
  const double active = double(budget) * (1.0 - random_ratio);
  return std::min(budget, int(std::ceil(active - 1e-9)));
}

std::vector<PixelCoord> sample_random(ImageDims dims, std::size_t n, Rng& rng) {
  std::vector<PixelCoord> all;
  all.reserve(dims.pixel_count());
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) all.push_back({x, y});
  }
  return draw_without_replacement(std::move(all), n, rng);
}

std::vector<PixelCoord> sample_grid(ImageDims dims, std::size_t n) {
  if (n > dims.pixel_count()) {
    throw Error(ErrorKind::ImageExhausted, "grid of " + std::to_string(n) + " points exceeds image");
  }
  std::vector<PixelCoord> out;
  if (n == 0) return out;
  const auto cols = std::size_t(std::ceil(std::sqrt(double(n) * dims.width / dims.height)));
  const std::size_t rows = (n + cols - 1) / cols;
  Bitmap used = Bitmap::Constant(dims.height, dims.width, false);
  for (std::size_t i = 0; i < rows && out.size() < n; ++i) {
    for (std::size_t j = 0; j < cols && out.size() < n; ++j) {
      PixelCoord p{std::min(int((j + 0.5) * dims.width / double(cols)), dims.width - 1),
                   std::min(int((i + 0.5) * dims.height / double(rows)), dims.height - 1)};
      while (used(p.y, p.x)) {
        if (++p.x == dims.width) {
          p.x = 0;
          p.y = (p.y + 1) % dims.height;
        }
      }
      used(p.y, p.x) = true;
      out.push_back(p);
    }
  }
  return out;
}

std::vector<PixelCoord> sample_centroid_guided(const ProposalSet& proposals, ImageDims dims,
                                               std::size_t n, Rng& rng) {
  if (n > dims.pixel_count()) {
    throw Error(ErrorKind::ImageExhausted, std::to_string(n) + " points exceed image");
  }
  std::vector<const CandidateMask*> order;
  for (const CandidateMask& m : proposals.masks) order.push_back(&m);
  std::sort(order.begin(), order.end(), [](const CandidateMask* a, const CandidateMask* b) {
    return a->area != b->area ? a->area > b->area : a->id < b->id;
  });
  if (order.size() > n) order.resize(n);

  Bitmap taken = Bitmap::Constant(dims.height, dims.width, false);
  std::vector<PixelCoord> out;
  for (const CandidateMask* m : order) {
    PixelCoord p{std::clamp(int(std::floor(m->cx + 0.5)), 0, dims.width - 1),
                 std::clamp(int(std::floor(m->cy + 0.5)), 0, dims.height - 1)};
    if (!m->contains(p)) {
      long best = std::numeric_limits<long>::max();
      PixelCoord snapped = p;
      for (int y = m->bbox.y0; y <= m->bbox.y1; ++y) {
        for (int x = m->bbox.x0; x <= m->bbox.x1; ++x) {
          if (!(*m->bitmap)(y, x)) continue;
          const long d2 = long(x - p.x) * (x - p.x) + long(y - p.y) * (y - p.y);
          if (d2 < best) {
            best = d2;
            snapped = {x, y};
          }
        }
      }
      p = snapped;
    }
    if (taken(p.y, p.x)) continue;
    taken(p.y, p.x) = true;
    out.push_back(p);
  }
  if (out.size() < n) {
    std::vector<PixelCoord> free;
    for (int y = 0; y < dims.height; ++y) {
      for (int x = 0; x < dims.width; ++x) {
        if (!taken(y, x)) free.push_back({x, y});
      }
    }
    for (PixelCoord p : draw_without_replacement(std::move(free), n - out.size(), rng)) out.push_back(p);
  }
  return out;
}

SamplerState::SamplerState(const SamplerConfig& config, std::shared_ptr<const ProposalSet> proposals)
    : config_(config), proposals_(std::move(proposals)), active_budget_(config.active_budget()) {
  config_.validate();
  if (!proposals_) throw Error(ErrorKind::InvalidArgument, "dynamic sampling needs proposals");
  const ImageDims d = proposals_->dims;
  if (std::size_t(config_.budget) > d.pixel_count()) {
    throw Error(ErrorKind::ImageExhausted, "budget exceeds pixel count");
  }
  proximity_ = sparseseg::object_proximity<double>(*proposals_, d);
  exploration_ = ScalarField<double>::Zero(d.height, d.width);
  selected_mask_ = Bitmap::Constant(d.height, d.width, false);
  phase_ = active_budget_ > 0 ? Phase::Active : Phase::Background;
}

PixelCoord SamplerState::select_next_active_point() const {
  if (phase_ != Phase::Active) {
    throw Error(ErrorKind::BudgetExhausted, "active-phase budget exhausted");
  }
  return argmax_unselected(acquisition_map(proximity_, exploration_, config_.lambda), selected_mask_);
}

void SamplerState::commit(PixelCoord p, ClassId label) {
  if (phase_ == Phase::Done) throw Error(ErrorKind::BudgetExhausted, "point budget exhausted");
  if (!in_bounds(dims(), p)) throw Error(ErrorKind::InvalidArgument, "point outside image");
  if (is_selected(p)) throw Error(ErrorKind::InvalidArgument, "point already selected");
  selected_.add(p, label);
  selected_mask_(p.y, p.x) = true;
  const int count = int(selected_.size());
  if (phase_ == Phase::Active) {
    update_exploration<double>(exploration_, exploration_empty_, p, dims());
    if (count >= active_budget_) phase_ = count >= config_.budget ? Phase::Done : Phase::Background;
  } else if (count >= config_.budget) {
    phase_ = Phase::Done;
  }
}

std::vector<PixelCoord> sample_background_points(const SamplerState& state, std::size_t k, Rng& rng) {
  if (k == 0) return {};
  const ImageDims d = state.dims();
  const std::size_t unselected = d.pixel_count() - state.selected().size();
  if (k > unselected) {
    throw Error(ErrorKind::ImageExhausted, "cannot draw " + std::to_string(k) + " background points");
  }
  std::vector<PixelCoord> pool, rest;
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      if (state.is_selected({x, y})) continue;
      (state.proposals().coverage(y, x) ? rest : pool).push_back({x, y});
    }
  }
  if (pool.size() >= k) return draw_without_replacement(std::move(pool), k, rng);
  const std::size_t shortfall = k - pool.size();
  const std::size_t pool_size = pool.size();
  std::vector<PixelCoord> out = draw_without_replacement(std::move(pool), pool_size, rng);
  for (PixelCoord p : draw_without_replacement(std::move(rest), shortfall, rng)) out.push_back(p);
  return out;
}

PointSuggester::PointSuggester(const SamplerConfig& config, ImageDims dims,
                               std::shared_ptr<const ProposalSet> proposals)
    : config_(config), dims_(dims), rng_(config.seed) {
  config_.validate();
  if (std::size_t(config_.budget) > dims.pixel_count()) {
    throw Error(ErrorKind::ImageExhausted, "budget exceeds pixel count");
  }
  if (needs_proposals(config_.strategy) && !proposals) {
    throw Error(ErrorKind::InvalidArgument,
                std::string("strategy ") + std::string(to_string(config_.strategy)) + " needs proposals");
  }
  if (proposals && proposals->dims != dims) {
    throw Error(ErrorKind::DimsMismatch, "proposal dims differ from image dims");
  }
  const auto n = std::size_t(config_.budget);
  switch (config_.strategy) {
    case Strategy::Random: plan_ = sample_random(dims, n, rng_); break;
    case Strategy::Grid: plan_ = sample_grid(dims, n); break;
    case Strategy::Centroid: plan_ = sample_centroid_guided(*proposals, dims, n, rng_); break;
    case Strategy::DynamicOnlyA:
    case Strategy::Dynamic: state_.emplace(config_, std::move(proposals)); break;
  }
  if (!state_) static_mask_ = Bitmap::Constant(dims.height, dims.width, false);
}

Phase PointSuggester::phase() const {
  if (state_) return state_->phase();
  return done() ? Phase::Done : Phase::Active;
}

const PointLabelSet& PointSuggester::selected() const {
  return state_ ? state_->selected() : static_selected_;
}

std::optional<PixelCoord> PointSuggester::next_from_plan() {
  auto taken = [&](PixelCoord p) { return state_ ? state_->is_selected(p) : static_mask_(p.y, p.x); };
  while (plan_cursor_ < plan_.size() && taken(plan_[plan_cursor_])) ++plan_cursor_;
  if (plan_cursor_ < plan_.size()) return plan_[plan_cursor_];
  return std::nullopt;
}

Suggestion PointSuggester::suggest() {
  if (done()) throw Error(ErrorKind::BudgetExhausted, "point budget exhausted");
  if (pending_) return *pending_;
  const auto remaining = std::size_t(config_.budget) - selected().size();
  if (state_ && state_->phase() == Phase::Active) {
    pending_ = Suggestion{state_->select_next_active_point(), Phase::Active};
    return *pending_;
  }
  std::optional<PixelCoord> next = next_from_plan();
  if (!next) {
    // Plan exhausted or invalidated by free annotation: draw a fresh one.
    if (state_) {
      plan_ = sample_background_points(*state_, remaining, rng_);
    } else {
      std::vector<PixelCoord> free;
      for (int y = 0; y < dims_.height; ++y) {
        for (int x = 0; x < dims_.width; ++x) {
          if (!static_mask_(y, x)) free.push_back({x, y});
        }
      }
      plan_ = draw_without_replacement(std::move(free), remaining, rng_);
    }
    plan_cursor_ = 0;
    next = next_from_plan();
  }
  pending_ = Suggestion{*next, state_ ? Phase::Background : Phase::Active};
  return *pending_;
}

void PointSuggester::commit(PixelCoord p, ClassId label) {
  if (done()) throw Error(ErrorKind::BudgetExhausted, "point budget exhausted");
  if (state_) {
    state_->commit(p, label);
  } else {
    if (!in_bounds(dims_, p)) throw Error(ErrorKind::InvalidArgument, "point outside image");
    if (static_mask_(p.y, p.x)) throw Error(ErrorKind::InvalidArgument, "point already selected");
    static_selected_.add(p, label);
    static_mask_(p.y, p.x) = true;
  }
  pending_.reset();
}

PointLabelSet sample_points(const SamplerConfig& config, ImageDims dims,
                            std::shared_ptr<const ProposalSet> proposals, const Annotator& annotator) {
  PointSuggester suggester(config, dims, std::move(proposals));
  while (!suggester.done()) {
    const PixelCoord p = suggester.suggest().point;
    suggester.commit(p, annotator(p));
  }
  return suggester.selected();
}

PointLabelSet run_dynamic_sampling(const SamplerConfig& config,
                                   std::shared_ptr<const ProposalSet> proposals,
                                   const Annotator& annotator) {
  if (config.strategy != Strategy::Dynamic && config.strategy != Strategy::DynamicOnlyA) {
    throw Error(ErrorKind::InvalidArgument, "run_dynamic_sampling needs a dynamic strategy");
  }
  if (!proposals) throw Error(ErrorKind::InvalidArgument, "dynamic sampling needs proposals");
  const ImageDims dims = proposals->dims;
  return sample_points(config, dims, std::move(proposals), annotator);
}

}  // namespace sparseseg
