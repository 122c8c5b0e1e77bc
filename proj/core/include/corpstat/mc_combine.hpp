#pragma once

// Combines per-stratum posteriors into the density of p = sum_i Pi_i * p_i
// by simulation: each iteration draws one p_i from every stratum posterior,
// snaps the weighted sum to the nearest grid point and adds 1/draws there.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpstat/density.hpp"
#include "corpstat/random.hpp"
#include "corpstat/sampler.hpp"

namespace corpstat {

inline constexpr std::int64_t kDefaultMcDraws = 1'000'000;

// Inverse-CDF sampler over one density's cells.
class DensitySampler {
 public:
  explicit DensitySampler(const GridDensity& d);

  // Smallest cell k whose cumulative mass exceeds u * total, u in [0, 1).
  std::size_t index(double u) const noexcept;
  double operator()(double u) const noexcept { return grid_.x(index(u)); }

 private:
  Grid grid_;
  std::vector<double> cdf_;
};

// One draw; returns a grid point x_k with probability f(x_k).
double sample_density(const GridDensity& d, PhiloxStream& rng);

// Grid cell receiving the weighted average of one set of picked points.
std::size_t combine_point(std::span<const double> picked, std::span<const double> weights,
                          const Grid& grid);

struct McResult {
  GridDensity density;
  std::vector<std::int64_t> counts;  // hits per cell; sums to draws exactly
  std::int64_t draws = 0;
  std::uint64_t seed = 0;
};

// Weights must sum to 1 within 1e-12 and posteriors share one grid.
// Bitwise deterministic in (posteriors, weights, draws, seed).
McResult monte_carlo_combine(std::span<const GridDensity> posteriors,
                             std::span<const double> weights, std::int64_t draws,
                             std::uint64_t seed);

// Newbold's closed-form cross-check: sum_i Pi_i * b_i / n_i.
double weighted_mean(std::span<const Tally> tallies, std::span<const double> weights);

struct CombinedEstimate {
  GridDensity density;
  std::int64_t mc_draws = 0;  // 0 when no simulation was needed
  std::uint64_t seed = 0;
  std::optional<double> weighted_mean_check = std::nullopt;
  double mean = 0.0;
  double mass = 0.95;
  CredibleInterval interval = {};
  std::int64_t corpus_size = 0;
  std::int64_t doc_lo = 0;
  std::int64_t doc_hi = 0;

  std::int64_t doc_width() const noexcept { return doc_hi - doc_lo; }
};

// Exact interval on the combined density, scaled to document counts (each
// endpoint times corpus_size, rounded to the nearest integer).
CombinedEstimate finalize(const GridDensity& combined, std::int64_t corpus_size,
                          double mass);

// Summary form (no density).
nlohmann::json to_json(const CombinedEstimate& e);

}  // namespace corpstat
