#pragma once

// A study as a persistent, append-only state machine:
//
//   create -> priors -> presample -> plan -> full sample -> finalize
//                                                 ^             |
//                                                 +- extension -+
//
// On disk a campaign directory holds
//   campaign.json  header: question, grid/MC config, rules, frozen partition
//   corpus.json    corpus index (spans into the original files)
//   events.jsonl   one JSON event per line: priors, phases, draws,
//                  judgments, plans, finalized results
//
// Every derived quantity (posteriors, plans, results) is recomputed from
// the event log. Mutations take an exclusive file lock, pick up events that
// other writers appended, validate, then append. A Campaign object itself is
// not thread-safe; share it behind a mutex.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpstat/allocation.hpp"
#include "corpstat/corpus.hpp"
#include "corpstat/density.hpp"
#include "corpstat/event_log.hpp"
#include "corpstat/mc_combine.hpp"
#include "corpstat/sampler.hpp"
#include "corpstat/stratifier.hpp"

namespace corpstat {

enum class CampaignState {
  kAwaitingPresample,
  kPresampleInProgress,
  kReadyToPlan,
  kPlanned,
  kFullInProgress,
  kReadyToFinalize,
  kFinalized,
  kExtensionInProgress,
};

std::string to_string(CampaignState state);

struct CampaignConfig {
  std::string question = "Does this document match the query?";
  std::size_t grid_intervals = Grid::kDefaultIntervals;
  std::int64_t mc_draws = kDefaultMcDraws;
  std::map<std::string, double> costs;  // per stratum; default 1
};

// Timestamp source; defaults to $CORPSTAT_NOW when set, else UTC now.
using Clock = std::function<std::string()>;
std::string utc_now_iso8601();
Clock default_clock();

struct PhaseRecord {
  Phase phase = Phase::kPresample;
  int index = 0;  // 0 for presample/full, 1.. for extensions
  std::uint64_t seed = 0;
  std::map<std::string, std::int64_t> counts;  // new draws per stratum
  std::int64_t first_draw_id = 0;
  std::int64_t draw_count = 0;
};

struct StoredResult {
  nlohmann::json summary;  // as written in the finalize event
  std::map<std::string, std::string> posterior_digests;
  std::map<std::string, Tally> tallies;  // cumulative, per weighted stratum
};

struct ReplayCheck {
  bool ok = true;
  std::size_t plans_checked = 0;
  std::size_t results_checked = 0;
  std::vector<std::string> mismatches;
};

class Campaign {
 public:
  // Writes the campaign directory (must not already hold a campaign). The
  // partition is computed here and frozen. campaign_id is the directory's
  // basename.
  static Campaign create(const std::filesystem::path& dir, const CampaignConfig& config,
                         const Corpus& corpus, const RuleSet& rules,
                         Clock clock = default_clock());

  // Loads header, corpus index and event log. Plans are recomputed and
  // checked against the stored ones; finalized results are recomputed on
  // demand (see verify_replay).
  static Campaign open(const std::filesystem::path& dir, Clock clock = default_clock());

  Campaign(Campaign&&) noexcept;
  Campaign& operator=(Campaign&&) noexcept;
  ~Campaign();

  // Picks up events appended by other processes.
  void refresh();

  // --- mutations (each appends events) ---

  // nullopt selects the uniform prior. Throws kState once a plan exists.
  void set_prior(std::string_view stratum, const std::optional<ElicitedPrior>& prior);

  // Presample and extension: `counts` are new draws per stratum (missing
  // strata get 0). Full: `counts` must be empty; totals come from the plan
  // and the presample already taken is subtracted.
  std::vector<SampleDraw> run_phase(Phase phase, const std::map<std::string, std::int64_t>& counts,
                                    std::uint64_t seed);

  // Throws kNotFound for an unknown draw and kState if the draw is already
  // judged (unless `correction`, which supersedes the latest verdict).
  Judgment record_judgment(std::int64_t draw_id, Verdict verdict, std::string_view reviewer,
                           std::optional<std::string> note = std::nullopt,
                           bool correction = false);

  AllocationPlan plan(std::int64_t budget);

  // Appends a result. Throws PendingJudgmentsError when draws are unjudged.
  CombinedEstimate finalize(double mass, std::uint64_t seed,
                            std::optional<std::int64_t> mc_draws = std::nullopt);

  // --- queries ---

  const std::string& campaign_id() const;
  const std::filesystem::path& dir() const;
  const CampaignConfig& config() const;
  const Corpus& corpus() const;
  const RuleSet& rules() const;
  const StratumPartition& partition() const;
  Grid grid() const;
  CampaignState state() const;

  const std::vector<SampleDraw>& draws() const;
  const SampleDraw& draw(std::int64_t draw_id) const;  // throws kNotFound
  std::optional<Judgment> judgment(std::int64_t draw_id) const;  // latest revision
  std::vector<Judgment> judgments() const;  // every judgment event, log order
  std::vector<std::int64_t> pending_draw_ids() const;
  const std::vector<PhaseRecord>& phases() const;

  const std::optional<ElicitedPrior>& elicited_prior(std::string_view stratum) const;
  GridDensity prior_density(std::string_view stratum) const;
  // Posterior after the presample (the prior if there was none).
  GridDensity presample_posterior(std::string_view stratum) const;
  // Posterior chained over every completed phase, phase by phase.
  GridDensity posterior(std::string_view stratum) const;
  // Judged draws only, across all phases.
  Tally tally(std::string_view stratum) const;
  Tally tally(std::string_view stratum, Phase phase) const;

  const std::optional<AllocationPlan>& current_plan() const;
  const std::vector<StoredResult>& results() const;
  // Density of the latest result (recomputed from the log).
  GridDensity latest_combined_density() const;

  // Recomputes every stored plan and result from the log prefix that
  // produced it and compares bitwise.
  ReplayCheck verify_replay() const;

  nlohmann::json summary_json() const;

 private:
  struct Impl;
  explicit Campaign(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace corpstat
