#pragma once

// Bayesian (Newbold) allocation of a sampling budget across strata from
// presample posteriors:
//
//   A_i = Pi_i^2 * P_i * (1 - P_i) / (n_i + 2)
//   q_i = sqrt(C_i * A_i * (n_i + 1)) / sum_j sqrt(C_j * A_j * (n_j + 1))
//
// Pi_i is the stratum's population fraction, P_i its presample posterior
// mean, n_i the presample size and C_i the per-document sampling cost. The
// cost enters in the numerator exactly as in Newbold's formula; textbook
// cost-aware Neyman allocation divides by sqrt(C_i) instead, so leave C_i at
// 1 unless that is what you want.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpstat/density.hpp"

namespace corpstat {

struct StratumState {
  std::string label;
  double fraction = 0.0;  // Pi_i
  double cost = 1.0;      // C_i
  int presample_n = 0;
  int presample_b = 0;
  double posterior_mean = 0.5;  // P_i
};

StratumState make_stratum_state(std::string label, double fraction, int presample_n,
                                 int presample_b, const GridDensity& presample_posterior,
                                 double cost = 1.0);

double a_factor(const StratumState& s);

struct StratumAllocation {
  std::string label;
  double a_factor = 0.0;
  double q = 0.0;           // real fraction of the budget
  double quota = 0.0;       // q * budget before rounding
  std::int64_t count = 0;   // integer allocation
};

struct AllocationPlan {
  std::int64_t total_budget = 0;
  std::vector<StratumAllocation> per_stratum;
  std::string residual_note;

  std::int64_t count(std::string_view label) const;  // throws kNotFound
};

// Integer counts by largest remainder; ties go to the larger Pi_i, then to
// the lexicographically smaller label. Strata with A_i = 0 always get 0.
// Throws kDegenerate when every A_i is zero.
AllocationPlan newbold_allocate(std::span<const StratumState> strata,
                                std::int64_t total_budget);

nlohmann::json to_json(const AllocationPlan& plan);
AllocationPlan allocation_plan_from_json(const nlohmann::json& j);

}  // namespace corpstat
