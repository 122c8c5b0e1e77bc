#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace corpstat {

enum class Phase { kPresample, kFull, kExtension };

std::string to_string(Phase phase);
Phase phase_from_string(std::string_view s);  // throws kInvalidArgument

using PhaseSet = std::set<Phase>;

struct SampleDraw {
  std::int64_t draw_id = 0;
  std::string stratum;
  std::string doc_id;
  Phase phase = Phase::kPresample;

  bool operator==(const SampleDraw&) const = default;
};

enum class Verdict { kMatch, kNoMatch };

std::string to_string(Verdict verdict);
Verdict verdict_from_string(std::string_view s);  // throws kValidation

struct Judgment {
  std::int64_t draw_id = 0;
  Verdict verdict = Verdict::kNoMatch;
  std::string reviewer;
  std::string timestamp;
  std::optional<std::string> note;
  // Corrections carry a higher revision; the highest revision per draw wins.
  int revision = 0;
  // Filled from an earlier judgment of the same document (repeat draw).
  bool auto_filled = false;
};

// Where a batch of draws sits in the campaign. `stream` separates the
// random streams of different strata and phases under one seed.
struct DrawRequest {
  std::string stratum;
  Phase phase = Phase::kPresample;
  std::uint64_t stream = 0;
  std::int64_t first_draw_id = 0;
};

// `count` independent uniform picks from `stratum_docs`, with replacement.
// Deterministic in (stratum_docs order, count, seed, request.stream).
// Throws kInvalidArgument for count < 0 or an empty stratum with count > 0.
std::vector<SampleDraw> draw_with_replacement(std::span<const std::string> stratum_docs,
                                              std::int64_t count, std::uint64_t seed,
                                              const DrawRequest& request = {});

struct Tally {
  int successes = 0;  // b: verdict == match
  int trials = 0;     // n: judged draws (repeat draws count once each)

  bool operator==(const Tally&) const = default;
};

// Counts the draws of `stratum` in `phases`. Judgments of other draws are
// ignored; a judgment naming no known draw is an error. Throws
// PendingJudgmentsError listing unjudged draws.
Tally tally(std::span<const Judgment> judgments, std::span<const SampleDraw> draws,
            std::string_view stratum, const PhaseSet& phases);

nlohmann::json to_json(const SampleDraw& d);
SampleDraw draw_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Judgment& j);
Judgment judgment_from_json(const nlohmann::json& j);

}  // namespace corpstat
