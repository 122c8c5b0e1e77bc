#include "corpstat/campaign.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <unordered_map>

#include <fmt/format.h>

#include "corpstat/errors.hpp"
#include "corpstat/random.hpp"

namespace fs = std::filesystem;

namespace corpstat {

namespace {

constexpr int kSchemaVersion = 1;
constexpr const char* kHeaderFile = "campaign.json";
constexpr const char* kCorpusFile = "corpus.json";
constexpr const char* kEventsFile = "events.jsonl";
constexpr const char* kLockFile = ".lock";

}  // namespace

std::string to_string(CampaignState state) {
  switch (state) {
    case CampaignState::kAwaitingPresample: return "awaiting_presample";
    case CampaignState::kPresampleInProgress: return "presample_in_progress";
    case CampaignState::kReadyToPlan: return "ready_to_plan";
    case CampaignState::kPlanned: return "planned";
    case CampaignState::kFullInProgress: return "full_in_progress";
    case CampaignState::kReadyToFinalize: return "ready_to_finalize";
    case CampaignState::kFinalized: return "finalized";
    case CampaignState::kExtensionInProgress: return "extension_in_progress";
  }
  return "unknown";
}

std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Clock default_clock() {
  return [] {
    if (const char* fixed = std::getenv("CORPSTAT_NOW"); fixed && *fixed) return std::string(fixed);
    return utc_now_iso8601();
  };
}

// ---------------------------------------------------------------------------
// Log folding

namespace {

// Everything derivable by folding events in order. Cheap to copy-construct
// empty and replay, which is how verify_replay checks stored values.
struct LogState {
  std::map<std::string, std::optional<ElicitedPrior>> priors;
  std::vector<PhaseRecord> phases;
  std::vector<SampleDraw> draws;  // draws[i].draw_id == i + 1
  std::vector<Judgment> judgments;
  std::unordered_map<std::int64_t, std::size_t> latest;  // draw_id -> judgments index
  std::optional<AllocationPlan> plan;
  std::vector<StoredResult> results;
  std::int64_t seq = 0;
  std::int64_t last_phase_seq = -1;
  std::int64_t last_finalize_seq = -1;

  bool judged(std::int64_t draw_id) const { return latest.contains(draw_id); }

  std::optional<Verdict> verdict_for_doc(std::string_view doc_id) const {
    std::optional<Verdict> v;
    std::int64_t best = -1;
    for (const auto& [draw_id, idx] : latest) {
      if (draws[draw_id - 1].doc_id == doc_id && draw_id > best) {
        best = draw_id;
        v = judgments[idx].verdict;
      }
    }
    return v;
  }

  std::vector<std::int64_t> pending() const {
    std::vector<std::int64_t> out;
    for (const auto& d : draws) {
      if (!judged(d.draw_id)) out.push_back(d.draw_id);
    }
    return out;
  }

  void apply(const nlohmann::json& e) {
    const auto type = e.at("type").get<std::string>();
    const auto event_seq = e.at("seq").get<std::int64_t>();
    if (event_seq != seq) {
      fail(ErrorCode::kConfig,
           fmt::format("event log out of order: expected seq {}, found {}", seq, event_seq));
    }
    ++seq;
    if (type == "prior") {
      const auto label = e.at("stratum").get<std::string>();
      if (e.value("uniform", false)) {
        priors[label] = std::nullopt;
      } else {
        priors[label] = elicited_prior_from_json(e.at("prior"));
      }
    } else if (type == "phase") {
      PhaseRecord p;
      p.phase = phase_from_string(e.at("phase").get<std::string>());
      p.index = e.at("index").get<int>();
      p.seed = e.at("seed").get<std::uint64_t>();
      p.counts = e.at("counts").get<std::map<std::string, std::int64_t>>();
      p.first_draw_id = e.at("first_draw_id").get<std::int64_t>();
      p.draw_count = e.at("draw_count").get<std::int64_t>();
      phases.push_back(std::move(p));
      last_phase_seq = event_seq;
    } else if (type == "draw") {
      auto d = draw_from_json(e.at("draw"));
      if (d.draw_id != static_cast<std::int64_t>(draws.size()) + 1) {
        fail(ErrorCode::kConfig, fmt::format("event log: unexpected draw id {}", d.draw_id));
      }
      draws.push_back(std::move(d));
    } else if (type == "judgment") {
      auto j = judgment_from_json(e.at("judgment"));
      if (j.draw_id < 1 || j.draw_id > static_cast<std::int64_t>(draws.size())) {
        fail(ErrorCode::kConfig,
             fmt::format("event log: judgment for unknown draw {}", j.draw_id));
      }
      const auto it = latest.find(j.draw_id);
      if (it == latest.end() || judgments[it->second].revision < j.revision) {
        latest[j.draw_id] = judgments.size();
      }
      judgments.push_back(std::move(j));
    } else if (type == "plan") {
      plan = allocation_plan_from_json(e.at("plan"));
    } else if (type == "finalize") {
      StoredResult r;
      r.summary = e.at("result");
      r.posterior_digests = e.at("posterior_digests").get<std::map<std::string, std::string>>();
      for (const auto& [label, t] : e.at("tallies").items()) {
        r.tallies[label] = {t.at("successes").get<int>(),
                            t.at("trials").get<int>()};
      }
      results.push_back(std::move(r));
      last_finalize_seq = event_seq;
    } else {
      fail(ErrorCode::kConfig, fmt::format("event log: unknown event type '{}'", type));
    }
  }
};

}  // namespace

// ---------------------------------------------------------------------------

struct Campaign::Impl {
  fs::path dir;
  std::string campaign_id;
  CampaignConfig config;
  Corpus corpus;
  std::optional<RuleSet> rules;
  StratumPartition partition;
  Clock clock;
  EventLog log;
  std::vector<nlohmann::json> events;
  LogState state;

  Impl(fs::path d, Clock c) : dir(std::move(d)), clock(std::move(c)), log(dir / kEventsFile) {}

  Grid grid() const { return Grid(config.grid_intervals); }

  const Stratum& stratum(std::string_view label) const { return partition.at(label); }

  void ingest(std::vector<nlohmann::json> fresh) {
    for (auto& e : fresh) {
      state.apply(e);
      events.push_back(std::move(e));
    }
  }

  void refresh() { ingest(log.read_new()); }

  // Assigns sequence numbers, writes, and folds the events in.
  void commit(std::vector<nlohmann::json> batch) {
    std::int64_t seq = state.seq;
    for (auto& e : batch) e["seq"] = seq++;
    log.append(batch);
    // Re-read what was just written so the offset stays in step.
    refresh();
  }

  // --- derived quantities over an arbitrary log state ---

  GridDensity prior_density(const LogState& s, std::string_view label) const {
    stratum(label);
    const auto it = s.priors.find(std::string(label));
    if (it == s.priors.end() || !it->second) return uniform_prior(grid());
    return spline_prior(*it->second, grid());
  }

  Tally phase_tally(const LogState& s, const PhaseRecord& p, std::string_view label,
                    bool judged_only) const {
    Tally t;
    std::vector<std::int64_t> pending;
    for (std::int64_t id = p.first_draw_id; id < p.first_draw_id + p.draw_count; ++id) {
      const auto& d = s.draws[id - 1];
      if (d.stratum != label) continue;
      const auto it = s.latest.find(id);
      if (it == s.latest.end()) {
        pending.push_back(id);
        continue;
      }
      ++t.trials;
      if (s.judgments[it->second].verdict == Verdict::kMatch) ++t.successes;
    }
    if (!judged_only && !pending.empty()) throw PendingJudgmentsError(std::move(pending));
    return t;
  }

  // Prior, then one Bayes update per phase in log order; `upto` limits how
  // many phases are used.
  GridDensity chained_posterior(const LogState& s, std::string_view label, std::size_t upto,
                                bool judged_only) const {
    GridDensity current = prior_density(s, label);
    for (std::size_t i = 0; i < std::min(upto, s.phases.size()); ++i) {
      const Tally t = phase_tally(s, s.phases[i], label, judged_only);
      if (t.trials > 0) {
        current = corpstat::posterior(binomial_likelihood(t.trials, t.successes, grid()),
                                      current);
      }
    }
    return current;
  }

  std::size_t presample_phase_count(const LogState& s) const {
    return (!s.phases.empty() && s.phases.front().phase == Phase::kPresample) ? 1 : 0;
  }

  Tally presample_tally(const LogState& s, std::string_view label) const {
    if (presample_phase_count(s) == 0) return {};
    return phase_tally(s, s.phases.front(), label, false);
  }

  AllocationPlan compute_plan(const LogState& s, std::int64_t budget,
                              std::map<std::string, std::string>* digests = nullptr) const {
    std::vector<StratumState> states;
    for (const auto& st : partition.strata) {
      const Tally t = presample_tally(s, st.label);
      const GridDensity post =
          chained_posterior(s, st.label, presample_phase_count(s), false);
      if (digests) (*digests)[st.label] = digest(post);
      const auto cost = config.costs.find(st.label);
      states.push_back(make_stratum_state(st.label, st.fraction, t.trials, t.successes, post,
                                          cost == config.costs.end() ? 1.0 : cost->second));
    }
    return newbold_allocate(states, budget);
  }

  struct ResultComputation {
    CombinedEstimate estimate;
    std::map<std::string, std::string> digests;
    nlohmann::json tallies = nlohmann::json::object();
  };

  ResultComputation compute_result(const LogState& s, double mass, std::uint64_t seed,
                                   std::int64_t mc_draws) const {
    std::map<std::string, std::string> digests;
    nlohmann::json tally_json = nlohmann::json::object();
    std::vector<GridDensity> posteriors;
    std::vector<double> weights;
    std::vector<Tally> tallies;
    for (const auto& st : partition.strata) {
      if (st.fraction <= 0.0) continue;
      auto post = chained_posterior(s, st.label, s.phases.size(), false);
      digests[st.label] = digest(post);
      Tally total;
      for (const auto& p : s.phases) {
        const Tally t = phase_tally(s, p, st.label, false);
        total.trials += t.trials;
        total.successes += t.successes;
      }
      tallies.push_back(total);
      tally_json[st.label] = {{"successes", total.successes}, {"trials", total.trials}};
      posteriors.push_back(std::move(post));
      weights.push_back(st.fraction);
    }

    GridDensity combined = posteriors.front();
    std::int64_t used_draws = 0;
    if (posteriors.size() > 1) {
      auto mc = monte_carlo_combine(posteriors, weights, mc_draws, seed);
      combined = std::move(mc.density);
      used_draws = mc.draws;
    }
    auto estimate = corpstat::finalize(combined, static_cast<std::int64_t>(corpus.total_count()),
                                       mass);
    estimate.mc_draws = used_draws;
    estimate.seed = seed;
    const bool all_sampled = std::all_of(tallies.begin(), tallies.end(),
                                         [](const Tally& t) { return t.trials > 0; });
    if (all_sampled) estimate.weighted_mean_check = weighted_mean(tallies, weights);
    return {std::move(estimate), std::move(digests), std::move(tally_json)};
  }

  CampaignState derive_state(const LogState& s) const {
    const auto pending = s.pending();
    if (!pending.empty()) {
      const auto first = pending.front();
      for (const auto& p : s.phases) {
        if (first >= p.first_draw_id && first < p.first_draw_id + p.draw_count) {
          switch (p.phase) {
            case Phase::kPresample: return CampaignState::kPresampleInProgress;
            case Phase::kFull: return CampaignState::kFullInProgress;
            case Phase::kExtension: return CampaignState::kExtensionInProgress;
          }
        }
      }
    }
    if (!s.plan) {
      return presample_phase_count(s) ? CampaignState::kReadyToPlan
                                       : CampaignState::kAwaitingPresample;
    }
    const bool has_full = std::any_of(s.phases.begin(), s.phases.end(),
                                      [](const auto& p) { return p.phase == Phase::kFull; });
    if (!has_full) return CampaignState::kPlanned;
    if (!s.results.empty() && s.last_finalize_seq > s.last_phase_seq) {
      return CampaignState::kFinalized;
    }
    return CampaignState::kReadyToFinalize;
  }

  nlohmann::json judgment_event(const Judgment& j) const {
    return {{"type", "judgment"}, {"judgment", to_json(j)}};
  }

  nlohmann::json header_json() const {
    return {{"schema_version", kSchemaVersion},
            {"campaign_id", campaign_id},
            {"question", config.question},
            {"grid", {{"intervals", config.grid_intervals}, {"step", grid().step()}}},
            {"mc", {{"draws", config.mc_draws}}},
            {"costs", config.costs},
            {"corpus_index", kCorpusFile},
            {"corpus_id", corpus.corpus_id()},
            {"rules", rules->to_json()},
            {"partition", to_json(partition)}};
  }
};

// ---------------------------------------------------------------------------

Campaign::Campaign(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Campaign::Campaign(Campaign&&) noexcept = default;
Campaign& Campaign::operator=(Campaign&&) noexcept = default;
Campaign::~Campaign() = default;

Campaign Campaign::create(const fs::path& dir, const CampaignConfig& config,
                          const Corpus& corpus, const RuleSet& rules, Clock clock) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  const auto canonical = fs::weakly_canonical(dir);
  FileLock lock(canonical / kLockFile);
  if (fs::exists(canonical / kHeaderFile) || fs::exists(canonical / kEventsFile)) {
    fail(ErrorCode::kState, fmt::format("{} already holds a campaign", canonical.string()));
  }
  if (config.mc_draws < 1) fail(ErrorCode::kInvalidArgument, "mc draws must be >= 1");
  Grid check(config.grid_intervals);
  (void)check;

  auto impl = std::make_unique<Impl>(canonical, std::move(clock));
  impl->campaign_id = canonical.filename().string();
  impl->config = config;
  impl->corpus = corpus;
  impl->rules = rules;
  impl->partition = stratify_corpus(corpus, rules);
  for (const auto& [label, cost] : config.costs) {
    if (!impl->partition.contains(label)) {
      fail(ErrorCode::kConfig, fmt::format("cost given for unknown stratum '{}'", label));
    }
  }

  write_file_atomic(canonical / kCorpusFile, dump_json(to_json(corpus)) + "\n");
  write_file_atomic(canonical / kHeaderFile, dump_json(impl->header_json(), 1) + "\n");
  write_file_atomic(canonical / kEventsFile, "");
  return Campaign(std::move(impl));
}

Campaign Campaign::open(const fs::path& dir, Clock clock) {
  const auto canonical = fs::weakly_canonical(dir);
  if (!fs::exists(canonical / kHeaderFile)) {
    fail(ErrorCode::kNotFound, fmt::format("no campaign at {}", canonical.string()));
  }
  auto impl = std::make_unique<Impl>(canonical, std::move(clock));
  const auto header = read_json_file(canonical / kHeaderFile);
  try {
    if (header.at("schema_version").get<int>() != kSchemaVersion) {
      fail(ErrorCode::kConfig, "campaign.json: unsupported schema_version");
    }
    impl->campaign_id = header.at("campaign_id").get<std::string>();
    impl->config.question = header.at("question").get<std::string>();
    impl->config.grid_intervals = header.at("grid").at("intervals").get<std::size_t>();
    impl->config.mc_draws = header.at("mc").at("draws").get<std::int64_t>();
    impl->config.costs = header.value("costs", std::map<std::string, double>{});
    impl->rules = RuleSet::from_json(header.at("rules"));
    impl->partition = partition_from_json(header.at("partition"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("campaign.json: ") + e.what());
  }
  impl->corpus = corpus_from_json(read_json_file(canonical / kCorpusFile));
  if (impl->corpus.corpus_id() != header.value("corpus_id", std::string{})) {
    fail(ErrorCode::kConfig, "campaign.json: corpus index does not match the stored corpus_id");
  }
  impl->refresh();
  return Campaign(std::move(impl));
}

void Campaign::refresh() { impl_->refresh(); }

void Campaign::set_prior(std::string_view stratum, const std::optional<ElicitedPrior>& prior) {
  FileLock lock(impl_->dir / kLockFile);
  impl_->refresh();
  impl_->stratum(stratum);
  if (impl_->state.plan) {
    fail(ErrorCode::kState,
         fmt::format("prior for '{}' is locked: an allocation plan already uses it", stratum));
  }
  nlohmann::json e = {{"type", "prior"}, {"stratum", stratum}};
  if (prior) {
    spline_prior(*prior, impl_->grid());  // validates and rejects degenerate priors
    ElicitedPrior stamped = *prior;
    if (stamped.timestamp.empty()) stamped.timestamp = impl_->clock();
    e["uniform"] = false;
    e["prior"] = to_json(stamped);
  } else {
    e["uniform"] = true;
  }
  impl_->commit({e});
}

std::vector<SampleDraw> Campaign::run_phase(Phase phase,
                                            const std::map<std::string, std::int64_t>& counts,
                                            std::uint64_t seed) {
  FileLock lock(impl_->dir / kLockFile);
  impl_->refresh();
  auto& s = impl_->state;
  const auto current = impl_->derive_state(s);

  if (const auto pending = s.pending(); !pending.empty()) {
    throw PendingJudgmentsError(pending);
  }
  for (const auto& [label, n] : counts) {
    impl_->stratum(label);
    if (n < 0) fail(ErrorCode::kInvalidArgument, fmt::format("negative count for '{}'", label));
  }

  std::map<std::string, std::int64_t> new_draws;
  int index = 0;
  switch (phase) {
    case Phase::kPresample:
      if (current != CampaignState::kAwaitingPresample) {
        fail(ErrorCode::kState, fmt::format("presample not allowed in state {}",
                                            to_string(current)));
      }
      new_draws = counts;
      break;
    case Phase::kFull: {
      if (current != CampaignState::kPlanned) {
        fail(ErrorCode::kState,
             fmt::format("full sample needs a plan first (state {})", to_string(current)));
      }
      if (!counts.empty()) {
        fail(ErrorCode::kInvalidArgument,
             "full sample counts come from the allocation plan; pass none");
      }
      for (const auto& a : s.plan->per_stratum) {
        const auto taken = impl_->presample_tally(s, a.label).trials;
        if (a.count < taken) {
          fail(ErrorCode::kInvalidArgument,
               fmt::format("allocation for '{}' ({}) is below the presample already taken ({})",
                           a.label, a.count, taken));
        }
        new_draws[a.label] = a.count - taken;
      }
      break;
    }
    case Phase::kExtension:
      if (current != CampaignState::kReadyToFinalize && current != CampaignState::kFinalized) {
        fail(ErrorCode::kState, fmt::format("extension needs a completed full sample (state {})",
                                            to_string(current)));
      }
      index = 1 + static_cast<int>(std::count_if(
                      s.phases.begin(), s.phases.end(),
                      [](const auto& p) { return p.phase == Phase::kExtension; }));
      new_draws = counts;
      break;
  }

  // Draw per stratum in partition order with an independent stream each.
  std::int64_t next_id = static_cast<std::int64_t>(s.draws.size()) + 1;
  const std::int64_t first_id = next_id;
  std::vector<SampleDraw> drawn;
  for (const auto& st : impl_->partition.strata) {
    const auto it = new_draws.find(st.label);
    const std::int64_t n = it == new_draws.end() ? 0 : it->second;
    if (n == 0) continue;
    DrawRequest req{st.label, phase,
                    stream_id(fmt::format("{}/{}/{}", st.label, to_string(phase), index)),
                    next_id};
    auto batch = draw_with_replacement(st.doc_ids, n, seed, req);
    next_id += n;
    std::move(batch.begin(), batch.end(), std::back_inserter(drawn));
  }

  std::map<std::string, std::int64_t> recorded;
  for (const auto& [label, n] : new_draws) {
    if (n > 0) recorded[label] = n;
  }
  std::vector<nlohmann::json> batch;
  batch.push_back({{"type", "phase"},
                   {"phase", to_string(phase)},
                   {"index", index},
                   {"seed", seed},
                   {"counts", recorded},
                   {"first_draw_id", first_id},
                   {"draw_count", static_cast<std::int64_t>(drawn.size())},
                   {"timestamp", impl_->clock()}});
  for (const auto& d : drawn) batch.push_back({{"type", "draw"}, {"draw", to_json(d)}});

  // Repeat draws of an already-judged document inherit its verdict but still
  // count as trials. Repeats within this batch are filled once the first copy
  // is judged (record_judgment).
  for (const auto& d : drawn) {
    if (auto v = s.verdict_for_doc(d.doc_id)) {
      Judgment j;
      j.draw_id = d.draw_id;
      j.verdict = *v;
      j.reviewer = "auto";
      j.timestamp = impl_->clock();
      j.note = fmt::format("repeat draw of {}; verdict copied", d.doc_id);
      j.auto_filled = true;
      batch.push_back(impl_->judgment_event(j));
    }
  }
  impl_->commit(std::move(batch));
  return drawn;
}

Judgment Campaign::record_judgment(std::int64_t draw_id, Verdict verdict,
                                   std::string_view reviewer, std::optional<std::string> note,
                                   bool correction) {
  FileLock lock(impl_->dir / kLockFile);
  impl_->refresh();
  auto& s = impl_->state;
  if (draw_id < 1 || draw_id > static_cast<std::int64_t>(s.draws.size())) {
    fail(ErrorCode::kNotFound, fmt::format("unknown draw {}", draw_id));
  }
  const auto existing = s.latest.find(draw_id);
  if (existing != s.latest.end() && !correction) {
    fail(ErrorCode::kState, fmt::format("draw {} is already judged", draw_id));
  }
  if (existing == s.latest.end() && correction) {
    fail(ErrorCode::kState, fmt::format("draw {} has no judgment to correct", draw_id));
  }

  Judgment j;
  j.draw_id = draw_id;
  j.verdict = verdict;
  j.reviewer = std::string(reviewer);
  j.timestamp = impl_->clock();
  j.note = std::move(note);
  j.revision = existing == s.latest.end() ? 0 : s.judgments[existing->second].revision + 1;

  std::vector<nlohmann::json> batch{impl_->judgment_event(j)};
  const auto& doc_id = s.draws[draw_id - 1].doc_id;
  for (const auto& d : s.draws) {
    if (d.draw_id == draw_id || d.doc_id != doc_id) continue;
    const auto other = s.latest.find(d.draw_id);
    const bool fill = other == s.latest.end() ||
                      (correction && s.judgments[other->second].auto_filled);
    if (!fill) continue;
    Judgment copy = j;
    copy.draw_id = d.draw_id;
    copy.reviewer = "auto";
    copy.note = fmt::format("repeat draw of {}; verdict copied from draw {}", doc_id, draw_id);
    copy.auto_filled = true;
    copy.revision = other == s.latest.end() ? 0 : s.judgments[other->second].revision + 1;
    batch.push_back(impl_->judgment_event(copy));
  }
  impl_->commit(std::move(batch));
  return j;
}

AllocationPlan Campaign::plan(std::int64_t budget) {
  FileLock lock(impl_->dir / kLockFile);
  impl_->refresh();
  const auto& s = impl_->state;
  const auto current = impl_->derive_state(s);
  if (current == CampaignState::kPresampleInProgress) throw PendingJudgmentsError(s.pending());
  if (current != CampaignState::kAwaitingPresample && current != CampaignState::kReadyToPlan &&
      current != CampaignState::kPlanned) {
    fail(ErrorCode::kState,
         fmt::format("allocation must precede the full sample (state {})", to_string(current)));
  }
  std::map<std::string, std::string> digests;
  auto plan = impl_->compute_plan(s, budget, &digests);
  impl_->commit({{{"type", "plan"},
                  {"budget", budget},
                  {"plan", to_json(plan)},
                  {"presample_posterior_digests", digests},
                  {"timestamp", impl_->clock()}}});
  return plan;
}

CombinedEstimate Campaign::finalize(double mass, std::uint64_t seed,
                                    std::optional<std::int64_t> mc_draws) {
  FileLock lock(impl_->dir / kLockFile);
  impl_->refresh();
  const auto& s = impl_->state;
  if (const auto pending = s.pending(); !pending.empty()) throw PendingJudgmentsError(pending);
  const auto current = impl_->derive_state(s);
  if (current != CampaignState::kReadyToFinalize && current != CampaignState::kFinalized) {
    fail(ErrorCode::kState,
         fmt::format("nothing to finalize yet (state {})", to_string(current)));
  }
  const std::int64_t draws = mc_draws.value_or(impl_->config.mc_draws);
  auto computed = impl_->compute_result(s, mass, seed, draws);
  impl_->commit({{{"type", "finalize"},
                  {"mass", mass},
                  {"seed", seed},
                  {"mc_draws", draws},
                  {"result", to_json(computed.estimate)},
                  {"posterior_digests", computed.digests},
                  {"tallies", computed.tallies},
                  {"timestamp", impl_->clock()}}});
  return std::move(computed.estimate);
}

// --- queries ---------------------------------------------------------------

const std::string& Campaign::campaign_id() const { return impl_->campaign_id; }
const fs::path& Campaign::dir() const { return impl_->dir; }
const CampaignConfig& Campaign::config() const { return impl_->config; }
const Corpus& Campaign::corpus() const { return impl_->corpus; }
const RuleSet& Campaign::rules() const { return *impl_->rules; }
const StratumPartition& Campaign::partition() const { return impl_->partition; }
Grid Campaign::grid() const { return impl_->grid(); }
CampaignState Campaign::state() const { return impl_->derive_state(impl_->state); }
const std::vector<SampleDraw>& Campaign::draws() const { return impl_->state.draws; }

const SampleDraw& Campaign::draw(std::int64_t draw_id) const {
  const auto& d = impl_->state.draws;
  if (draw_id < 1 || draw_id > static_cast<std::int64_t>(d.size())) {
    fail(ErrorCode::kNotFound, fmt::format("unknown draw {}", draw_id));
  }
  return d[draw_id - 1];
}

std::optional<Judgment> Campaign::judgment(std::int64_t draw_id) const {
  const auto& s = impl_->state;
  const auto it = s.latest.find(draw_id);
  if (it == s.latest.end()) return std::nullopt;
  return s.judgments[it->second];
}

std::vector<Judgment> Campaign::judgments() const { return impl_->state.judgments; }
std::vector<std::int64_t> Campaign::pending_draw_ids() const { return impl_->state.pending(); }
const std::vector<PhaseRecord>& Campaign::phases() const { return impl_->state.phases; }

const std::optional<ElicitedPrior>& Campaign::elicited_prior(std::string_view stratum) const {
  static const std::optional<ElicitedPrior> kUniform;
  impl_->stratum(stratum);
  const auto it = impl_->state.priors.find(std::string(stratum));
  return it == impl_->state.priors.end() ? kUniform : it->second;
}

GridDensity Campaign::prior_density(std::string_view stratum) const {
  return impl_->prior_density(impl_->state, stratum);
}

GridDensity Campaign::presample_posterior(std::string_view stratum) const {
  const auto& s = impl_->state;
  return impl_->chained_posterior(s, stratum, impl_->presample_phase_count(s), true);
}

GridDensity Campaign::posterior(std::string_view stratum) const {
  const auto& s = impl_->state;
  return impl_->chained_posterior(s, stratum, s.phases.size(), true);
}

Tally Campaign::tally(std::string_view stratum) const {
  impl_->stratum(stratum);
  Tally total;
  for (const auto& p : impl_->state.phases) {
    const Tally t = impl_->phase_tally(impl_->state, p, stratum, true);
    total.trials += t.trials;
    total.successes += t.successes;
  }
  return total;
}

Tally Campaign::tally(std::string_view stratum, Phase phase) const {
  impl_->stratum(stratum);
  Tally total;
  for (const auto& p : impl_->state.phases) {
    if (p.phase != phase) continue;
    const Tally t = impl_->phase_tally(impl_->state, p, stratum, true);
    total.trials += t.trials;
    total.successes += t.successes;
  }
  return total;
}

const std::optional<AllocationPlan>& Campaign::current_plan() const {
  return impl_->state.plan;
}

const std::vector<StoredResult>& Campaign::results() const { return impl_->state.results; }

GridDensity Campaign::latest_combined_density() const {
  // Replay the log up to the last finalize event and recompute there.
  LogState prefix;
  const nlohmann::json* last = nullptr;
  std::size_t last_index = 0;
  for (std::size_t i = 0; i < impl_->events.size(); ++i) {
    if (impl_->events[i].at("type") == "finalize") {
      last = &impl_->events[i];
      last_index = i;
    }
  }
  if (!last) fail(ErrorCode::kState, "campaign has no finalized result");
  for (std::size_t i = 0; i < last_index; ++i) prefix.apply(impl_->events[i]);
  return impl_
      ->compute_result(prefix, last->at("mass").get<double>(),
                       last->at("seed").get<std::uint64_t>(),
                       last->at("mc_draws").get<std::int64_t>())
      .estimate.density;
}

ReplayCheck Campaign::verify_replay() const {
  ReplayCheck check;
  LogState replay;
  for (const auto& e : impl_->events) {
    const auto type = e.at("type").get<std::string>();
    const auto seq = e.at("seq").get<std::int64_t>();
    if (type == "plan") {
      std::map<std::string, std::string> digests;
      const auto plan = impl_->compute_plan(replay, e.at("budget").get<std::int64_t>(), &digests);
      ++check.plans_checked;
      if (to_json(plan) != e.at("plan")) {
        check.mismatches.push_back(fmt::format("event {}: allocation plan differs", seq));
      }
      if (nlohmann::json(digests) != e.at("presample_posterior_digests")) {
        check.mismatches.push_back(fmt::format("event {}: presample posteriors differ", seq));
      }
    } else if (type == "finalize") {
      const auto computed = impl_->compute_result(replay, e.at("mass").get<double>(),
                                                  e.at("seed").get<std::uint64_t>(),
                                                  e.at("mc_draws").get<std::int64_t>());
      ++check.results_checked;
      if (to_json(computed.estimate) != e.at("result")) {
        check.mismatches.push_back(fmt::format("event {}: finalized result differs", seq));
      }
      if (nlohmann::json(computed.digests) != e.at("posterior_digests")) {
        check.mismatches.push_back(fmt::format("event {}: stratum posteriors differ", seq));
      }
    }
    replay.apply(e);
  }
  check.ok = check.mismatches.empty();
  return check;
}

nlohmann::json Campaign::summary_json() const {
  const auto& s = impl_->state;
  auto strata = nlohmann::json::array();
  for (const auto& st : impl_->partition.strata) {
    auto tally_json = [](const Tally& t) {
      return nlohmann::json{{"successes", t.successes}, {"trials", t.trials}};
    };
    nlohmann::json js = {{"label", st.label},
                         {"count", st.count()},
                         {"fraction", st.fraction},
                         {"prior", elicited_prior(st.label) ? "elicited" : "uniform"},
                         {"tally", tally_json(tally(st.label))},
                         {"presample", tally_json(tally(st.label, Phase::kPresample))}};
    if (st.empty()) js["empty"] = true;
    strata.push_back(std::move(js));
  }
  auto phases = nlohmann::json::array();
  for (const auto& p : s.phases) {
    phases.push_back({{"phase", to_string(p.phase)},
                      {"index", p.index},
                      {"seed", p.seed},
                      {"counts", p.counts},
                      {"first_draw_id", p.first_draw_id},
                      {"draw_count", p.draw_count}});
  }
  const auto pending = s.pending();
  nlohmann::json j = {{"schema_version", kSchemaVersion},
                      {"campaign_id", impl_->campaign_id},
                      {"question", impl_->config.question},
                      {"state", to_string(state())},
                      {"corpus_size", impl_->corpus.total_count()},
                      {"grid_step", grid().step()},
                      {"strata", strata},
                      {"phases", phases},
                      {"draw_count", s.draws.size()},
                      {"pending_count", pending.size()},
                      {"result_count", s.results.size()}};
  j["allocation"] = s.plan ? to_json(*s.plan) : nlohmann::json();
  j["latest_result"] = s.results.empty() ? nlohmann::json() : s.results.back().summary;
  return j;
}

}  // namespace corpstat
