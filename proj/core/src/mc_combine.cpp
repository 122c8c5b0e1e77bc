#include "corpstat/mc_combine.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "corpstat/errors.hpp"
#include "corpstat/summation.hpp"

namespace corpstat {

namespace {

// Stream id reserved for Monte Carlo combination ("mc_combine").
constexpr std::uint64_t kMcStream = 0x6d635f636f6d6269ULL;

}  // namespace

DensitySampler::DensitySampler(const GridDensity& d) : grid_(d.grid()), cdf_(d.size()) {
  CompensatedSum acc;
  for (std::size_t k = 0; k < d.size(); ++k) {
    acc.add(d[k]);
    cdf_[k] = acc.value();
  }
}

std::size_t DensitySampler::index(double u) const noexcept {
  const double target = u * cdf_.back();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
  if (it == cdf_.end()) {
    // u * total rounded up to the total: take the last cell with mass.
    auto k = cdf_.size() - 1;
    while (k > 0 && cdf_[k - 1] == cdf_[k]) --k;
    return k;
  }
  return static_cast<std::size_t>(it - cdf_.begin());
}

double sample_density(const GridDensity& d, PhiloxStream& rng) {
  return DensitySampler(d)(rng.uniform());
}

std::size_t combine_point(std::span<const double> picked, std::span<const double> weights,
                          const Grid& grid) {
  double p = 0.0;
  for (std::size_t i = 0; i < picked.size(); ++i) p += weights[i] * picked[i];
  return grid.nearest(p);
}

McResult monte_carlo_combine(std::span<const GridDensity> posteriors,
                             std::span<const double> weights, std::int64_t draws,
                             std::uint64_t seed) {
  if (posteriors.empty()) fail(ErrorCode::kInvalidArgument, "combine: no posteriors");
  if (posteriors.size() != weights.size()) {
    fail(ErrorCode::kInvalidArgument, "combine: one weight per posterior required");
  }
  if (draws < 1) fail(ErrorCode::kInvalidArgument, "combine: draws must be >= 1");
  const Grid grid = posteriors.front().grid();
  for (const auto& p : posteriors) {
    if (!(p.grid() == grid)) fail(ErrorCode::kInvalidArgument, "combine: grids differ");
  }
  for (double w : weights) {
    if (!(w >= 0.0)) fail(ErrorCode::kInvalidArgument, "combine: negative weight");
  }
  const double weight_total = compensated_sum(weights);
  if (std::fabs(weight_total - 1.0) > 1e-12) {
    fail(ErrorCode::kInvalidArgument,
         fmt::format("combine: weights sum to {:.17g}, not 1", weight_total));
  }

  std::vector<DensitySampler> samplers;
  samplers.reserve(posteriors.size());
  for (const auto& p : posteriors) samplers.emplace_back(p);

  // Draw t, stratum i uses word (i % 4) of block (t, i / 4) under key
  // (seed, kMcStream): any worker can compute any draw independently.
  const std::size_t k = posteriors.size();
  std::vector<std::int64_t> counts(grid.size(), 0);
  std::vector<double> picked(k);
  for (std::int64_t t = 0; t < draws; ++t) {
    Philox4x64::Counter block{};
    for (std::size_t i = 0; i < k; ++i) {
      if (i % 4 == 0) {
        block = Philox4x64::block({static_cast<std::uint64_t>(t), i / 4, 0, 0},
                                  {seed, kMcStream});
      }
      picked[i] = samplers[i](to_unit_double(block[i % 4]));
    }
    ++counts[combine_point(picked, weights, grid)];
  }

  std::vector<double> mass(grid.size());
  const double inv = static_cast<double>(draws);
  for (std::size_t c = 0; c < mass.size(); ++c) mass[c] = static_cast<double>(counts[c]) / inv;
  return {GridDensity(grid, std::move(mass)), std::move(counts), draws, seed};
}

double weighted_mean(std::span<const Tally> tallies, std::span<const double> weights) {
  if (tallies.size() != weights.size()) {
    fail(ErrorCode::kInvalidArgument, "weighted mean: one weight per tally required");
  }
  CompensatedSum acc;
  for (std::size_t i = 0; i < tallies.size(); ++i) {
    if (tallies[i].trials < 1) {
      fail(ErrorCode::kInvalidArgument,
           fmt::format("weighted mean: stratum {} has no sampled documents", i));
    }
    acc.add(weights[i] * static_cast<double>(tallies[i].successes) /
            static_cast<double>(tallies[i].trials));
  }
  return acc.value();
}

CombinedEstimate finalize(const GridDensity& combined, std::int64_t corpus_size,
                          double mass) {
  if (corpus_size < 0) fail(ErrorCode::kInvalidArgument, "finalize: negative corpus size");
  CombinedEstimate e{.density = combined};
  e.mass = mass;
  e.mean = corpstat::mean(combined);
  e.interval = credible_interval_exact(combined, mass);
  e.corpus_size = corpus_size;
  const double n = static_cast<double>(corpus_size);
  e.doc_lo = std::llround(e.interval.lo * n);
  e.doc_hi = std::llround(e.interval.hi * n);
  return e;
}

nlohmann::json to_json(const CombinedEstimate& e) {
  nlohmann::json j = {{"mean", e.mean},
                      {"mass", e.mass},
                      {"interval", to_json(e.interval)},
                      {"corpus_size", e.corpus_size},
                      {"doc_interval", {e.doc_lo, e.doc_hi}},
                      {"doc_width", e.doc_width()},
                      {"mc_draws", e.mc_draws},
                      {"seed", e.seed},
                      {"density_digest", digest(e.density)}};
  j["weighted_mean_check"] =
      e.weighted_mean_check ? nlohmann::json(*e.weighted_mean_check) : nlohmann::json();
  return j;
}

}  // namespace corpstat
