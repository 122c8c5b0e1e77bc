#pragma once

// Grid-based probability numerics over a proportion x in [0, 1].
//
// Every likelihood, prior, posterior and combined estimate is a GridDensity:
// a probability mass per grid point x_k = k / m, k = 0..m, summing to one.
// Masses (not per-unit-x density values) are stored so that sampling and
// interval summation operate on the cells directly.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace corpstat {

class Grid {
 public:
  static constexpr std::size_t kDefaultIntervals = 100'000;  // step 1e-5
  static constexpr std::size_t kMaxIntervals = 1'000'000;    // step 1e-6

  explicit Grid(std::size_t intervals = kDefaultIntervals);

  // Throws unless 1/step is an integer (to 1e-9 relative) within
  // [1, kMaxIntervals].
  static Grid with_step(double step);

  std::size_t intervals() const noexcept { return intervals_; }
  std::size_t size() const noexcept { return intervals_ + 1; }
  double step() const noexcept { return 1.0 / static_cast<double>(intervals_); }
  double x(std::size_t k) const noexcept {
    return static_cast<double>(k) / static_cast<double>(intervals_);
  }

  // Index of the grid point nearest to x (clamped to [0, 1]); exact
  // half-step ties go to the even index.
  std::size_t nearest(double x) const noexcept;

  bool operator==(const Grid&) const = default;

 private:
  std::size_t intervals_;
};

class GridDensity {
 public:
  // Takes masses as given; they must be finite, non-negative and one per
  // grid point. Use normalized() to rescale arbitrary weights.
  GridDensity(Grid grid, std::vector<double> mass);

  // Rescales non-negative weights to unit total. Throws kDegenerate with
  // `what` in the message when the total is zero.
  static GridDensity normalized(Grid grid, std::vector<double> weights,
                                const std::string& what = "density");

  // All mass in the cell nearest x.
  static GridDensity spike(Grid grid, double x);

  const Grid& grid() const noexcept { return grid_; }
  std::span<const double> mass() const noexcept { return mass_; }
  double operator[](std::size_t k) const { return mass_[k]; }
  std::size_t size() const noexcept { return mass_.size(); }

  double total() const noexcept;
  std::size_t argmax() const noexcept;  // lowest index among ties

  bool operator==(const GridDensity&) const = default;

 private:
  Grid grid_;
  std::vector<double> mass_;
};

// One elicited (x, likelihood) knot.
struct PriorPoint {
  double x = 0.0;
  double likelihood = 0.0;

  bool operator==(const PriorPoint&) const = default;
};

struct ElicitedPrior {
  std::vector<PriorPoint> points;
  std::string reviewer;
  std::string timestamp;
};

// The eleven knots x = 0, 0.1, ..., 1.0 at a constant height.
ElicitedPrior flat_elicitation(double height = 1.0);

// Throws kValidation naming the violated constraint: at least 4 points,
// x strictly increasing from exactly 0 to exactly 1, likelihoods finite and
// non-negative, not all zero.
void validate(const ElicitedPrior& prior);

GridDensity binomial_likelihood(int trials, int successes, const Grid& grid);
GridDensity uniform_prior(const Grid& grid);
GridDensity spline_prior(const ElicitedPrior& elicited, const Grid& grid);
GridDensity posterior(const GridDensity& likelihood, const GridDensity& prior);

double mean(const GridDensity& d);
double variance(const GridDensity& d);

enum class IntervalMethod { kExact, kNormal };

struct CredibleInterval {
  double lo = 0.0;
  double hi = 0.0;
  double mass_captured = 0.0;
  IntervalMethod method = IntervalMethod::kExact;
  // Grid cells bounding the interval; for the normal method these are the
  // cells nearest lo and hi.
  std::size_t lo_index = 0;
  std::size_t hi_index = 0;

  double width() const noexcept { return hi - lo; }
};

// Expands outward from the (lowest) argmax cell, adding whichever neighbor
// has the larger mass, until the captured mass reaches `mass`. Equal
// neighbors alternate, right first.
CredibleInterval credible_interval_exact(const GridDensity& d, double mass);

// mean +/- z * sd, clipped to [0, 1], with z the standard normal quantile at
// (1 + mass) / 2.
CredibleInterval credible_interval_normal(const GridDensity& d, double mass);

std::string to_string(IntervalMethod method);

// Serialization. With `sparse`, zero runs are dropped and the non-zero
// stretches are written as {start, masses} segments.
nlohmann::json to_json(const GridDensity& d, bool sparse = true);
GridDensity density_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CredibleInterval& ci);
nlohmann::json to_json(const ElicitedPrior& prior);
ElicitedPrior elicited_prior_from_json(const nlohmann::json& j);

// Two-column "x mass" text for external plotting.
void write_plot_data(std::ostream& os, const GridDensity& d);

struct DensityPoint {
  double x = 0.0;
  double mass = 0.0;
};

// Sums consecutive cells into at most `max_points` buckets. Each point sits
// at the centre of its bucket and carries the bucket's total mass.
std::vector<DensityPoint> downsample(const GridDensity& d,
                                     std::size_t max_points = 2000);

// Order-sensitive 64-bit digest of the masses' bit patterns; used to check
// bitwise replay of stored results.
std::string digest(const GridDensity& d);

}  // namespace corpstat
