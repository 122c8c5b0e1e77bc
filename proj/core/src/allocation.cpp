#include "corpstat/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "corpstat/errors.hpp"
#include "corpstat/summation.hpp"

namespace corpstat {

StratumState make_stratum_state(std::string label, double fraction, int presample_n,
                                 int presample_b, const GridDensity& presample_posterior,
                                 double cost) {
  StratumState s;
  s.label = std::move(label);
  s.fraction = fraction;
  s.cost = cost;
  s.presample_n = presample_n;
  s.presample_b = presample_b;
  s.posterior_mean = mean(presample_posterior);
  return s;
}

double a_factor(const StratumState& s) {
  if (s.presample_n < 0) fail(ErrorCode::kInvalidArgument, "a_factor: negative presample size");
  const double p = std::clamp(s.posterior_mean, 0.0, 1.0);
  return s.fraction * s.fraction * p * (1.0 - p) / (s.presample_n + 2.0);
}

std::int64_t AllocationPlan::count(std::string_view label) const {
  for (const auto& a : per_stratum) {
    if (a.label == label) return a.count;
  }
  fail(ErrorCode::kNotFound, fmt::format("allocation has no stratum '{}'", label));
}

AllocationPlan newbold_allocate(std::span<const StratumState> strata,
                                std::int64_t total_budget) {
  if (strata.empty()) fail(ErrorCode::kInvalidArgument, "allocation: no strata");
  if (total_budget < 0) fail(ErrorCode::kInvalidArgument, "allocation: negative budget");

  AllocationPlan plan;
  plan.total_budget = total_budget;
  std::vector<double> weight(strata.size());
  CompensatedSum denominator;
  for (std::size_t i = 0; i < strata.size(); ++i) {
    const auto& s = strata[i];
    if (!(s.cost > 0.0)) {
      fail(ErrorCode::kInvalidArgument,
           fmt::format("allocation: stratum '{}' has non-positive cost", s.label));
    }
    const double a = a_factor(s);
    weight[i] = std::sqrt(s.cost) * std::sqrt(a) * std::sqrt(s.presample_n + 1.0);
    denominator.add(weight[i]);
    plan.per_stratum.push_back({s.label, a, 0.0, 0.0, 0});
  }
  const double total = denominator.value();
  if (!(total > 0.0)) {
    fail(ErrorCode::kDegenerate,
         "allocation undefined: all strata degenerate (every A_i is 0); "
         "add presample data or widen the priors");
  }

  std::int64_t assigned = 0;
  std::vector<double> remainder(strata.size(), 0.0);
  for (std::size_t i = 0; i < strata.size(); ++i) {
    auto& a = plan.per_stratum[i];
    a.q = weight[i] / total;
    a.quota = a.q * static_cast<double>(total_budget);
    a.count = static_cast<std::int64_t>(std::floor(a.quota));
    remainder[i] = a.quota - static_cast<double>(a.count);
    assigned += a.count;
  }

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < strata.size(); ++i) {
    if (weight[i] > 0.0) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (remainder[x] != remainder[y]) return remainder[x] > remainder[y];
    if (strata[x].fraction != strata[y].fraction) return strata[x].fraction > strata[y].fraction;
    return strata[x].label < strata[y].label;
  });

  std::int64_t residual = total_budget - assigned;
  std::vector<std::string> bumped;
  for (std::size_t k = 0; residual > 0; k = (k + 1) % order.size()) {
    ++plan.per_stratum[order[k]].count;
    bumped.push_back(plan.per_stratum[order[k]].label);
    --residual;
  }
  plan.residual_note =
      bumped.empty()
          ? "no rounding residual"
          : fmt::format("{} unit(s) by largest remainder to: {}", bumped.size(),
                        fmt::join(bumped, ", "));
  return plan;
}

nlohmann::json to_json(const AllocationPlan& plan) {
  auto rows = nlohmann::json::array();
  for (const auto& a : plan.per_stratum) {
    rows.push_back({{"label", a.label},
                    {"a_factor", a.a_factor},
                    {"q", a.q},
                    {"quota", a.quota},
                    {"count", a.count}});
  }
  return {{"total_budget", plan.total_budget},
          {"per_stratum", rows},
          {"residual_note", plan.residual_note}};
}

AllocationPlan allocation_plan_from_json(const nlohmann::json& j) {
  try {
    AllocationPlan plan;
    plan.total_budget = j.at("total_budget").get<std::int64_t>();
    plan.residual_note = j.value("residual_note", std::string{});
    for (const auto& r : j.at("per_stratum")) {
      plan.per_stratum.push_back({r.at("label").get<std::string>(),
                                  r.at("a_factor").get<double>(), r.at("q").get<double>(),
                                  r.at("quota").get<double>(),
                                  r.at("count").get<std::int64_t>()});
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("allocation plan: ") + e.what());
  }
}

}  // namespace corpstat
