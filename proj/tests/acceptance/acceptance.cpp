// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances are pinned below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "corpstat/allocation.hpp"
#include "corpstat/campaign.hpp"
#include "corpstat/density.hpp"
#include "corpstat/mc_combine.hpp"
#include "test_support.hpp"

using namespace corpstat;
namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kCorpus = 45820;
constexpr std::int64_t kPseudo = 3444;
constexpr std::int64_t kReal = 42376;
constexpr double kMass = 0.95;
constexpr std::uint64_t kSeed = 20240101;

// Criterion 1: Table 1 non-informative row.
constexpr double kC1Lo = 0.89519, kC1Hi = 0.96374, kC1Tol = 0.002;
constexpr std::int64_t kC1DocLo = 41017, kC1DocHi = 44158, kC1DocTol = 100;
constexpr std::int64_t kC1Width = 3141, kC1WidthTol = 150;
constexpr double kC1Seconds = 5.0;
// Criterion 2.
constexpr double kC2Seconds = 1.0;
// Criterion 3: Table 2 non-informative row, plus an independent numpy
// simulation (tests/oracles/stratified_mc.py, mean of four repetitions).
constexpr double kC3Lo = 0.91074, kC3Hi = 0.93789, kC3Tol = 0.004;
constexpr std::int64_t kC3Width = 1244, kC3WidthTol = 200;
constexpr double kC3OracleLo = 0.91042, kC3OracleHi = 0.93759, kC3OracleTol = 0.001;
constexpr double kC3Seconds = 60.0;
// Criterion 4.
constexpr double kC4MaxRatio = 0.45;
// Criterion 5.
constexpr double kC5MeanTol = 2e-4, kC5VarRelTol = 0.02;
// Criterion 6.
constexpr double kC6Tol = 1e-9;
// Criterion 8: the independent simulation gives about 653.
constexpr std::int64_t kC8MaxWidth = 900;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int n, const std::string& name, const Outcome& o) {
  std::printf("criterion %2d: %s  %s: %s\n", n, o.pass ? "PASS" : "FAIL", name.c_str(),
              o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

Outcome guarded(const std::function<Outcome()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

GridDensity uniform_posterior(int n, int b, const Grid& g = Grid()) {
  return posterior(binomial_likelihood(n, b, g), uniform_prior(g));
}

// Synthetic replica corpus: 3444 divider documents among 45,820, spread over
// 46 files.
void write_replica_corpus(const fs::path& dir) {
  fs::create_directories(dir);
  std::int64_t written = 0, pseudo = 0;
  for (int f = 0; written < kCorpus; ++f) {
    std::string text;
    for (int k = 0; k < 1000 && written < kCorpus; ++k, ++written) {
      // Evenly interleaved: document i is a divider iff floor(i*P/N) steps.
      const bool is_pseudo = (written + 1) * kPseudo / kCorpus > written * kPseudo / kCorpus;
      if (is_pseudo) {
        ++pseudo;
        text += "<DOC>\n<DOCNO>D" + std::to_string(written) +
                "</DOCNO>\n>Part IV\nDepartment of Examples\n</DOC>\n";
      } else {
        text += "<DOC>\n<DOCNO>D" + std::to_string(written) +
                "</DOCNO>\nRules and Regulations\nnotice text\nmore notice text\n</DOC>\n";
      }
    }
    corpstat::testing::write_file(dir / fmt::format("fr{:03}.sgml", f), text);
  }
  if (pseudo != kPseudo) throw std::runtime_error("fixture has the wrong divider count");
}

// Every apparent pseudo-document is a pseudo-document and every apparent
// real document is real, as in the replicated study.
void judge_perfectly(Campaign& c) {
  for (const auto id : c.pending_draw_ids()) {
    if (c.judgment(id)) continue;
    const auto& d = c.draw(id);
    c.record_judgment(id, d.stratum == "pseudo" ? Verdict::kNoMatch : Verdict::kMatch,
                      "acceptance");
  }
}

// Narrowest contiguous window holding >= mass; ties broken by larger mass.
std::pair<std::size_t, std::size_t> brute_minimal(const GridDensity& d, double mass) {
  const auto m = d.mass();
  std::vector<double> c(m.size() + 1, 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) c[i + 1] = c[i] + m[i];
  std::size_t best_lo = 0, best_hi = m.size() - 1;
  double best_mass = c.back();
  std::size_t hi = 0;
  for (std::size_t lo = 0; lo < m.size(); ++lo) {
    if (hi < lo) hi = lo;
    while (hi < m.size() && c[hi + 1] - c[lo] < mass) ++hi;
    if (hi == m.size()) break;
    const double held = c[hi + 1] - c[lo];
    if (hi - lo < best_hi - best_lo || (hi - lo == best_hi - best_lo && held > best_mass)) {
      best_lo = lo;
      best_hi = hi;
      best_mass = held;
    }
  }
  return {best_lo, best_hi};
}

}  // namespace

int main() {
  corpstat::testing::TempDir tmp;
  std::printf("acceptance fixtures in %s\n", tmp.path().c_str());

  // ---- 1. overall non-informative replica
  std::int64_t overall_width = 0;
  report(1, "overall non-informative replica", guarded([&] {
           const auto t0 = std::chrono::steady_clock::now();
           const auto post = uniform_posterior(200, 187);
           const auto e = finalize(post, kCorpus, kMass);
           const double secs = seconds_since(t0);
           overall_width = e.doc_width();
           const bool ok = std::abs(e.interval.lo - kC1Lo) <= kC1Tol &&
                           std::abs(e.interval.hi - kC1Hi) <= kC1Tol &&
                           std::abs(e.doc_lo - kC1DocLo) <= kC1DocTol &&
                           std::abs(e.doc_hi - kC1DocHi) <= kC1DocTol &&
                           std::abs(e.doc_width() - kC1Width) <= kC1WidthTol &&
                           secs < kC1Seconds;
           return Outcome{ok, fmt::format("[{:.5f}, {:.5f}] docs [{}, {}] width {} in {:.2f}s",
                                          e.interval.lo, e.interval.hi, e.doc_lo, e.doc_hi,
                                          e.doc_width(), secs)};
         }));

  // Campaign replica used by criteria 2, 3, 8 and 9.
  std::optional<Campaign> campaign;
  const auto setup = guarded([&] {
    write_replica_corpus(tmp / "corpus");
    const auto corpus = ingest_corpus({tmp / "corpus"});
    CampaignConfig config;
    config.question = "Is this a real Federal Register document?";
    campaign.emplace(Campaign::create(tmp / "replica", config, corpus,
                                      corpstat::testing::two_strata_rules(),
                                      corpstat::testing::fixed_clock()));
    campaign->run_phase(Phase::kPresample, {{"pseudo", 10}, {"real", 10}}, kSeed);
    judge_perfectly(*campaign);
    return Outcome{true, ""};
  });
  if (!setup.pass) std::printf("replica setup failed: %s\n", setup.detail.c_str());

  // ---- 2. allocation replica
  report(2, "allocation replica (15, 185)", guarded([&] {
           if (!campaign) return Outcome{false, "no replica campaign"};
           const auto& p = campaign->partition();
           if (p.at("pseudo").count() != kPseudo || p.at("real").count() != kReal) {
             return Outcome{false, "fixture strata sizes differ from 3444/42376"};
           }
           const auto t0 = std::chrono::steady_clock::now();
           // Direct allocation from the presample posteriors, timed alone.
           const std::vector<StratumState> strata{
               make_stratum_state("pseudo", p.at("pseudo").fraction, 10, 0,
                                  campaign->presample_posterior("pseudo")),
               make_stratum_state("real", p.at("real").fraction, 10, 10,
                                  campaign->presample_posterior("real"))};
           const auto direct = newbold_allocate(strata, 200);
           const double secs = seconds_since(t0);
           const auto plan = campaign->plan(200);
           const bool ok = direct.count("pseudo") == 15 && direct.count("real") == 185 &&
                           plan.count("pseudo") == 15 && plan.count("real") == 185 &&
                           secs < kC2Seconds;
           return Outcome{ok, fmt::format("pseudo {} real {} (campaign plan {} / {}) in {:.3f}s",
                                          direct.count("pseudo"), direct.count("real"),
                                          plan.count("pseudo"), plan.count("real"), secs)};
         }));

  // ---- 3. stratified non-informative replica
  std::int64_t stratified_width = 0;
  report(3, "stratified non-informative replica", guarded([&] {
           if (!campaign || !campaign->current_plan()) return Outcome{false, "no plan"};
           campaign->run_phase(Phase::kFull, {}, kSeed + 1);
           judge_perfectly(*campaign);
           const Tally tp = campaign->tally("pseudo"), tr = campaign->tally("real");
           if (!(tp == Tally{0, 15}) || !(tr == Tally{185, 185})) {
             return Outcome{false, fmt::format("tallies {}/{} and {}/{}", tp.successes,
                                               tp.trials, tr.successes, tr.trials)};
           }
           const auto t0 = std::chrono::steady_clock::now();
           const auto e = campaign->finalize(kMass, kSeed + 2, 1'000'000);
           const double secs = seconds_since(t0);
           stratified_width = e.doc_width();
           const bool paper = std::abs(e.interval.lo - kC3Lo) <= kC3Tol &&
                              std::abs(e.interval.hi - kC3Hi) <= kC3Tol &&
                              std::abs(e.doc_width() - kC3Width) <= kC3WidthTol;
           const bool oracle = std::abs(e.interval.lo - kC3OracleLo) <= kC3OracleTol &&
                               std::abs(e.interval.hi - kC3OracleHi) <= kC3OracleTol;
           return Outcome{paper && oracle && secs < kC3Seconds && e.mc_draws == 1'000'000,
                          fmt::format("[{:.5f}, {:.5f}] docs [{}, {}] width {}; paper {}, "
                                      "independent simulation {}; {:.1f}s",
                                      e.interval.lo, e.interval.hi, e.doc_lo, e.doc_hi,
                                      e.doc_width(), paper ? "ok" : "off", oracle ? "ok" : "off",
                                      secs)};
         }));

  // ---- 4. stratification benefit
  report(4, "stratification benefit ratio", guarded([&] {
           if (overall_width <= 0 || stratified_width <= 0) {
             return Outcome{false, "criteria 1 and 3 did not produce widths"};
           }
           const double ratio =
               static_cast<double>(stratified_width) / static_cast<double>(overall_width);
           return Outcome{ratio <= kC4MaxRatio, fmt::format("{} / {} = {:.3f} (limit {})",
                                                            stratified_width, overall_width,
                                                            ratio, kC4MaxRatio)};
         }));

  // ---- 5. conjugacy
  report(5, "conjugacy oracle suite", guarded([&] {
           std::mt19937_64 rng(5);
           double worst_mean = 0.0, worst_var = 0.0;
           const Grid g;
           for (int i = 0; i < 50; ++i) {
             const int n = std::uniform_int_distribution<int>(1, 500)(rng);
             const int b = std::uniform_int_distribution<int>(0, n)(rng);
             const auto post = uniform_posterior(n, b, g);
             const double a = b + 1.0, bb = n - b + 1.0;
             const double cm = a / (a + bb);
             const double cv = a * bb / ((a + bb) * (a + bb) * (a + bb + 1.0));
             worst_mean = std::max(worst_mean, std::abs(mean(post) - cm));
             worst_var = std::max(worst_var, std::abs(variance(post) - cv) / cv);
           }
           return Outcome{worst_mean <= kC5MeanTol && worst_var <= kC5VarRelTol,
                          fmt::format("50 pairs; worst mean error {:.2e}, worst variance "
                                      "error {:.3f}%",
                                      worst_mean, 100.0 * worst_var)};
         }));

  // ---- 6. chained-update identity
  report(6, "chained-update identity", guarded([&] {
           std::mt19937_64 rng(6);
           const Grid g;
           ElicitedPrior shaped;
           shaped.points = {{0.0, 0.1}, {0.2, 0.6}, {0.5, 1.8}, {0.7, 2.4}, {0.9, 1.0},
                            {1.0, 0.3}};
           const std::vector<GridDensity> priors{uniform_prior(g), spline_prior(shaped, g)};
           double worst = 0.0;
           for (int i = 0; i < 20; ++i) {
             const int n1 = std::uniform_int_distribution<int>(1, 50)(rng);
             const int n2 = std::uniform_int_distribution<int>(1, 300)(rng);
             const int b1 = std::uniform_int_distribution<int>(0, n1)(rng);
             const int b2 = std::uniform_int_distribution<int>(0, n2)(rng);
             for (const auto& prior : priors) {
               const auto stage1 = posterior(binomial_likelihood(n1, b1, g), prior);
               const auto stage2 = posterior(binomial_likelihood(n2, b2, g), stage1);
               const auto once = posterior(binomial_likelihood(n1 + n2, b1 + b2, g), prior);
               for (std::size_t k = 0; k < g.size(); ++k) {
                 worst = std::max(worst, std::abs(stage2[k] - once[k]));
               }
             }
           }
           return Outcome{worst <= kC6Tol,
                          fmt::format("20 splits x 2 priors; worst cell difference {:.2e}",
                                      worst)};
         }));

  // ---- 7. exact-interval properties
  report(7, "exact-interval properties", guarded([&] {
           // Interior Beta-shaped posteriors (uniform prior, 20 <= n <= 500,
           // success share between 0.2 and 0.8).
           std::mt19937_64 rng(7);
           const Grid g;
           int bad = 0;
           std::string first_bad;
           for (int i = 0; i < 20; ++i) {
             const int n = std::uniform_int_distribution<int>(20, 500)(rng);
             const int b = std::uniform_int_distribution<int>(n / 5, 4 * n / 5)(rng);
             const auto d = uniform_posterior(n, b, g);
             const auto exact = credible_interval_exact(d, kMass);
             const auto normal = credible_interval_normal(d, kMass);
             double held = 0.0;
             for (std::size_t k = exact.lo_index; k <= exact.hi_index; ++k) held += d[k];
             const auto [blo, bhi] = brute_minimal(d, kMass);
             const auto diff = [](std::size_t a, std::size_t b) {
               return a > b ? a - b : b - a;
             };
             const bool ok = exact.lo_index <= exact.hi_index && held >= kMass - 1e-12 &&
                             exact.mass_captured >= kMass - 1e-12 &&
                             exact.width() <= normal.width() + 1e-12 &&
                             diff(exact.lo_index, blo) <= 1 && diff(exact.hi_index, bhi) <= 1;
             if (!ok) {
               ++bad;
               if (first_bad.empty()) {
                 first_bad = fmt::format("; first failure n={} b={} exact [{}, {}] brute [{}, {}] "
                                         "widths {:.6f} vs normal {:.6f}",
                                         n, b, exact.lo_index, exact.hi_index, blo, bhi,
                                         exact.width(), normal.width());
               }
             }
           }
           return Outcome{bad == 0, fmt::format("20 densities, {} failing{}", bad, first_bad)};
         }));

  // ---- 8. extension behaviour
  std::int64_t extended_width = 0;
  report(8, "extension reduces the interval", guarded([&] {
           if (!campaign || campaign->results().empty()) return Outcome{false, "no result"};
           campaign->run_phase(Phase::kExtension, {{"pseudo", 15}, {"real", 185}}, kSeed + 3);
           judge_perfectly(*campaign);
           const auto e = campaign->finalize(kMass, kSeed + 4, 1'000'000);
           extended_width = e.doc_width();
           const bool ok = extended_width < stratified_width && extended_width < kC8MaxWidth;
           return Outcome{ok, fmt::format("width {} -> {} (limit {})", stratified_width,
                                          extended_width, kC8MaxWidth)};
         }));

  // ---- 9. determinism
  report(9, "event-log replay is bitwise", guarded([&] {
           if (!campaign) return Outcome{false, "no replica campaign"};
           const auto reopened = Campaign::open(tmp / "replica");
           const auto check = reopened.verify_replay();
           const bool digest_ok =
               !reopened.results().empty() &&
               digest(reopened.latest_combined_density()) ==
                   reopened.results().back().summary.at("density_digest").get<std::string>();
           const bool ok = check.ok && digest_ok && check.plans_checked >= 1 &&
                           check.results_checked >= 2;
           std::string why;
           for (const auto& m : check.mismatches) why += "; " + m;
           return Outcome{ok, fmt::format("{} plan(s), {} result(s) recomputed from the log{}",
                                          check.plans_checked, check.results_checked, why)};
         }));

  // ---- 10. Monte Carlo point example
  report(10, "weighted-average placement", guarded([&] {
           const std::vector<double> picked{0.2, 0.9}, weights{0.075, 0.925};
           const Grid g;
           const auto cell = combine_point(picked, weights, g);
           return Outcome{cell == g.nearest(0.8475) && cell == 84750u,
                          fmt::format("cell {} (x = {:.5f})", cell, g.x(cell))};
         }));

  std::printf("%s: %d criterion/criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
