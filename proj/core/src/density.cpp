#include "corpstat/density.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "corpstat/errors.hpp"
#include "corpstat/hash.hpp"
#include "corpstat/spline.hpp"
#include "corpstat/summation.hpp"

namespace corpstat {

std::string to_hex(std::uint64_t value) { return fmt::format("{:016x}", value); }

// ---------------------------------------------------------------------------
// Grid

Grid::Grid(std::size_t intervals) : intervals_(intervals) {
  if (intervals_ < 1 || intervals_ > kMaxIntervals) {
    fail(ErrorCode::kInvalidArgument,
         fmt::format("grid: interval count {} outside [1, {}]", intervals_,
                     kMaxIntervals));
  }
}

Grid Grid::with_step(double step) {
  if (!(step > 0.0) || step > 1.0 || !std::isfinite(step)) {
    fail(ErrorCode::kInvalidArgument,
         fmt::format("grid: step {} outside (0, 1]", step));
  }
  const double inverse = 1.0 / step;
  const double rounded = std::round(inverse);
  if (std::fabs(inverse - rounded) > 1e-9 * rounded) {
    fail(ErrorCode::kInvalidArgument,
         fmt::format("grid: 1/step must be an integer (got {})", inverse));
  }
  if (rounded > static_cast<double>(kMaxIntervals)) {
    fail(ErrorCode::kInvalidArgument,
         fmt::format("grid: step {} finer than 1e-6", step));
  }
  return Grid(static_cast<std::size_t>(rounded));
}

std::size_t Grid::nearest(double x) const noexcept {
  const double scaled = std::clamp(x, 0.0, 1.0) * static_cast<double>(intervals_);
  // nearbyint honours the default round-half-to-even mode.
  const double k = std::nearbyint(scaled);
  return static_cast<std::size_t>(k);
}

// ---------------------------------------------------------------------------
// GridDensity

GridDensity::GridDensity(Grid grid, std::vector<double> mass)
    : grid_(grid), mass_(std::move(mass)) {
  if (mass_.size() != grid_.size()) {
    fail(ErrorCode::kInvalidArgument,
         fmt::format("density: {} masses for a grid of {} points", mass_.size(),
                     grid_.size()));
  }
  for (double m : mass_) {
    if (!std::isfinite(m) || m < 0.0) {
      fail(ErrorCode::kInvalidArgument,
           "density: masses must be finite and non-negative");
    }
  }
}

GridDensity GridDensity::normalized(Grid grid, std::vector<double> weights,
                                    const std::string& what) {
  const double total = compensated_sum(weights);
  if (!(total > 0.0) || !std::isfinite(total)) {
    fail(ErrorCode::kDegenerate, what + ": total mass is zero");
  }
  for (double& w : weights) w /= total;
  return GridDensity(grid, std::move(weights));
}

GridDensity GridDensity::spike(Grid grid, double x) {
  std::vector<double> mass(grid.size(), 0.0);
  mass[grid.nearest(x)] = 1.0;
  return GridDensity(grid, std::move(mass));
}

double GridDensity::total() const noexcept { return compensated_sum(mass_); }

std::size_t GridDensity::argmax() const noexcept {
  return static_cast<std::size_t>(
      std::max_element(mass_.begin(), mass_.end()) - mass_.begin());
}

// ---------------------------------------------------------------------------
// Elicited priors

ElicitedPrior flat_elicitation(double height) {
  ElicitedPrior prior;
  for (int i = 0; i <= 10; ++i) {
    prior.points.push_back({i / 10.0, height});
  }
  return prior;
}

void validate(const ElicitedPrior& prior) {
  const auto& pts = prior.points;
  if (pts.size() < 4) {
    fail(ErrorCode::kValidation,
         fmt::format("prior: need at least 4 points, got {}", pts.size()));
  }
  if (pts.front().x != 0.0) fail(ErrorCode::kValidation, "prior: first x must be 0");
  if (pts.back().x != 1.0) fail(ErrorCode::kValidation, "prior: last x must be 1");
  bool any_positive = false;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!std::isfinite(pts[i].x) || !std::isfinite(pts[i].likelihood)) {
      fail(ErrorCode::kValidation, fmt::format("prior: point {} is not finite", i));
    }
    if (pts[i].likelihood < 0.0) {
      fail(ErrorCode::kValidation,
           fmt::format("prior: point {} has negative likelihood", i));
    }
    if (i > 0 && !(pts[i].x > pts[i - 1].x)) {
      fail(ErrorCode::kValidation,
           fmt::format("prior: x values must be strictly increasing (point {})", i));
    }
    any_positive = any_positive || pts[i].likelihood > 0.0;
  }
  if (!any_positive) fail(ErrorCode::kValidation, "prior: likelihoods are all zero");
}

// ---------------------------------------------------------------------------
// Likelihoods, priors, posteriors

GridDensity binomial_likelihood(int trials, int successes, const Grid& grid) {
  if (trials < 1 || successes < 0 || successes > trials) {
    fail(ErrorCode::kInvalidArgument,
         fmt::format("binomial likelihood: need 0 <= b <= n, n >= 1 (n={}, b={})",
                     trials, successes));
  }
  const double n = trials;
  const double b = successes;
  const double failures = n - b;
  const double log_choose =
      std::lgamma(n + 1.0) - std::lgamma(b + 1.0) - std::lgamma(failures + 1.0);
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  std::vector<double> log_f(grid.size());
  double peak = kNegInf;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double x = grid.x(k);
    double lf = log_choose;
    if (successes > 0) lf += (x > 0.0) ? b * std::log(x) : kNegInf;
    if (failures > 0) lf += (x < 1.0) ? failures * std::log1p(-x) : kNegInf;
    log_f[k] = lf;
    peak = std::max(peak, lf);
  }
  for (double& v : log_f) v = std::exp(v - peak);
  return GridDensity::normalized(grid, std::move(log_f), "binomial likelihood");
}

GridDensity uniform_prior(const Grid& grid) {
  return GridDensity(grid, std::vector<double>(
                               grid.size(), 1.0 / static_cast<double>(grid.size())));
}

GridDensity spline_prior(const ElicitedPrior& elicited, const Grid& grid) {
  validate(elicited);
  std::vector<double> xs, ys;
  for (const auto& p : elicited.points) {
    xs.push_back(p.x);
    ys.push_back(p.likelihood);
  }
  const NaturalCubicSpline spline(xs, ys);
  std::vector<double> weights(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    weights[k] = std::max(0.0, spline(grid.x(k)));
  }
  try {
    return GridDensity::normalized(grid, std::move(weights), "prior");
  } catch (const Error&) {
    fail(ErrorCode::kDegenerate, "degenerate prior: spline is non-positive everywhere");
  }
}

GridDensity posterior(const GridDensity& likelihood, const GridDensity& prior) {
  if (!(likelihood.grid() == prior.grid())) {
    fail(ErrorCode::kInvalidArgument, "posterior: likelihood and prior grids differ");
  }
  std::vector<double> product(prior.size());
  for (std::size_t k = 0; k < product.size(); ++k) {
    product[k] = likelihood[k] * prior[k];
  }
  const double total = compensated_sum(product);
  if (!(total > 0.0)) {
    fail(ErrorCode::kDegenerate, "prior excludes all data-supported values");
  }
  for (double& p : product) p /= total;
  return GridDensity(prior.grid(), std::move(product));
}

double mean(const GridDensity& d) {
  CompensatedSum acc;
  for (std::size_t k = 0; k < d.size(); ++k) acc.add(d.grid().x(k) * d[k]);
  return acc.value();
}

double variance(const GridDensity& d) {
  const double mu = mean(d);
  CompensatedSum acc;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double dx = d.grid().x(k) - mu;
    acc.add(d[k] * dx * dx);
  }
  return std::max(0.0, acc.value());
}

// ---------------------------------------------------------------------------
// Credible intervals

CredibleInterval credible_interval_exact(const GridDensity& d, double mass) {
  if (!(mass > 0.0 && mass < 1.0)) {
    fail(ErrorCode::kInvalidArgument,
         fmt::format("credible interval: mass {} outside (0, 1)", mass));
  }
  const auto m = d.mass();
  std::size_t lo = d.argmax();
  std::size_t hi = lo;
  CompensatedSum captured;
  captured.add(m[lo]);
  bool tie_went_right = false;

  while (captured.value() < mass && (lo > 0 || hi + 1 < m.size())) {
    const bool has_left = lo > 0;
    const bool has_right = hi + 1 < m.size();
    bool take_right;
    if (!has_left) {
      take_right = true;
    } else if (!has_right) {
      take_right = false;
    } else if (m[hi + 1] != m[lo - 1]) {
      take_right = m[hi + 1] > m[lo - 1];
    } else {
      take_right = !tie_went_right;
      tie_went_right = take_right;
    }
    if (take_right) {
      ++hi;
      captured.add(m[hi]);
    } else {
      --lo;
      captured.add(m[lo]);
    }
  }

  CredibleInterval ci;
  ci.lo = d.grid().x(lo);
  ci.hi = d.grid().x(hi);
  ci.lo_index = lo;
  ci.hi_index = hi;
  ci.mass_captured = captured.value();
  ci.method = IntervalMethod::kExact;
  return ci;
}

CredibleInterval credible_interval_normal(const GridDensity& d, double mass) {
  if (!(mass > 0.0 && mass < 1.0)) {
    fail(ErrorCode::kInvalidArgument,
         fmt::format("credible interval: mass {} outside (0, 1)", mass));
  }
  const boost::math::normal standard;
  const double z = boost::math::quantile(standard, 0.5 + mass / 2.0);
  const double mu = mean(d);
  const double sd = std::sqrt(variance(d));

  CredibleInterval ci;
  ci.method = IntervalMethod::kNormal;
  ci.lo = std::clamp(mu - z * sd, 0.0, 1.0);
  ci.hi = std::clamp(mu + z * sd, 0.0, 1.0);
  ci.lo_index = d.grid().nearest(ci.lo);
  ci.hi_index = d.grid().nearest(ci.hi);
  CompensatedSum captured;
  for (std::size_t k = ci.lo_index; k <= ci.hi_index; ++k) captured.add(d[k]);
  ci.mass_captured = captured.value();
  return ci;
}

std::string to_string(IntervalMethod method) {
  return method == IntervalMethod::kExact ? "exact" : "normal";
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const GridDensity& d, bool sparse) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["step"] = d.grid().step();
  j["intervals"] = d.grid().intervals();
  const auto m = d.mass();
  if (!sparse) {
    j["encoding"] = "dense";
    j["masses"] = std::vector<double>(m.begin(), m.end());
    return j;
  }
  j["encoding"] = "sparse";
  auto segments = nlohmann::json::array();
  std::size_t k = 0;
  while (k < m.size()) {
    if (m[k] == 0.0) {
      ++k;
      continue;
    }
    const std::size_t start = k;
    while (k < m.size() && m[k] != 0.0) ++k;
    segments.push_back({{"start", start},
                        {"masses", std::vector<double>(m.begin() + start,
                                                       m.begin() + k)}});
  }
  j["segments"] = std::move(segments);
  return j;
}

GridDensity density_from_json(const nlohmann::json& j) {
  try {
    const Grid grid(j.at("intervals").get<std::size_t>());
    const auto encoding = j.value("encoding", std::string("dense"));
    if (encoding == "dense") {
      return GridDensity(grid, j.at("masses").get<std::vector<double>>());
    }
    if (encoding != "sparse") {
      fail(ErrorCode::kConfig, "density: unknown encoding '" + encoding + "'");
    }
    std::vector<double> mass(grid.size(), 0.0);
    for (const auto& seg : j.at("segments")) {
      const auto start = seg.at("start").get<std::size_t>();
      const auto values = seg.at("masses").get<std::vector<double>>();
      if (start + values.size() > mass.size()) {
        fail(ErrorCode::kConfig, "density: segment runs past the grid");
      }
      std::copy(values.begin(), values.end(), mass.begin() + start);
    }
    return GridDensity(grid, std::move(mass));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("density: ") + e.what());
  }
}

nlohmann::json to_json(const CredibleInterval& ci) {
  return {{"lo", ci.lo},
          {"hi", ci.hi},
          {"mass_captured", ci.mass_captured},
          {"method", to_string(ci.method)},
          {"lo_index", ci.lo_index},
          {"hi_index", ci.hi_index}};
}

nlohmann::json to_json(const ElicitedPrior& prior) {
  auto points = nlohmann::json::array();
  for (const auto& p : prior.points) points.push_back({p.x, p.likelihood});
  return {{"points", points},
          {"reviewer", prior.reviewer},
          {"timestamp", prior.timestamp}};
}

ElicitedPrior elicited_prior_from_json(const nlohmann::json& j) {
  ElicitedPrior prior;
  try {
    for (const auto& p : j.at("points")) {
      if (p.is_array()) {
        prior.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      } else {
        prior.points.push_back(
            {p.at("x").get<double>(), p.at("likelihood").get<double>()});
      }
    }
    prior.reviewer = j.value("reviewer", std::string{});
    prior.timestamp = j.value("timestamp", std::string{});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kValidation, std::string("prior: malformed points: ") + e.what());
  }
  return prior;
}

void write_plot_data(std::ostream& os, const GridDensity& d) {
  for (std::size_t k = 0; k < d.size(); ++k) {
    os << fmt::format("{:.10g} {:.10g}\n", d.grid().x(k), d[k]);
  }
}

std::vector<DensityPoint> downsample(const GridDensity& d, std::size_t max_points) {
  if (max_points == 0) fail(ErrorCode::kInvalidArgument, "downsample: max_points is 0");
  const std::size_t n = d.size();
  const std::size_t bucket = (n + max_points - 1) / max_points;
  std::vector<DensityPoint> out;
  out.reserve((n + bucket - 1) / bucket);
  for (std::size_t start = 0; start < n; start += bucket) {
    const std::size_t end = std::min(n, start + bucket);
    CompensatedSum acc;
    for (std::size_t k = start; k < end; ++k) acc.add(d[k]);
    out.push_back({0.5 * (d.grid().x(start) + d.grid().x(end - 1)), acc.value()});
  }
  return out;
}

std::string digest(const GridDensity& d) {
  Fnv1a64 h;
  h.update(static_cast<std::uint64_t>(d.grid().intervals()));
  for (double m : d.mass()) h.update(m);
  return to_hex(h.value());
}

}  // namespace corpstat
