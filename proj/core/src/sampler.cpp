#include "corpstat/sampler.hpp"

#include <algorithm>
#include <unordered_map>

#include <fmt/format.h>

#include "corpstat/errors.hpp"
#include "corpstat/random.hpp"

namespace corpstat {

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::kPresample: return "presample";
    case Phase::kFull: return "full";
    case Phase::kExtension: return "extension";
  }
  return "unknown";
}

Phase phase_from_string(std::string_view s) {
  if (s == "presample") return Phase::kPresample;
  if (s == "full") return Phase::kFull;
  if (s == "extension") return Phase::kExtension;
  fail(ErrorCode::kInvalidArgument,
       fmt::format("unknown phase '{}' (expected presample|full|extension)", s));
}

std::string to_string(Verdict verdict) {
  return verdict == Verdict::kMatch ? "match" : "no_match";
}

Verdict verdict_from_string(std::string_view s) {
  if (s == "match" || s == "y" || s == "yes") return Verdict::kMatch;
  if (s == "no_match" || s == "n" || s == "no") return Verdict::kNoMatch;
  fail(ErrorCode::kValidation, fmt::format("unknown verdict '{}' (expected match|no_match)", s));
}

std::vector<SampleDraw> draw_with_replacement(std::span<const std::string> stratum_docs,
                                              std::int64_t count, std::uint64_t seed,
                                              const DrawRequest& request) {
  if (count < 0) fail(ErrorCode::kInvalidArgument, "draw: negative count");
  if (count > 0 && stratum_docs.empty()) {
    fail(ErrorCode::kInvalidArgument,
         fmt::format("draw: stratum '{}' is empty and cannot be sampled", request.stratum));
  }
  std::vector<SampleDraw> draws;
  draws.reserve(static_cast<std::size_t>(count));
  PhiloxStream rng(seed, request.stream);
  for (std::int64_t i = 0; i < count; ++i) {
    const auto pick = rng.below(stratum_docs.size());
    draws.push_back({request.first_draw_id + i, request.stratum, stratum_docs[pick],
                     request.phase});
  }
  return draws;
}

Tally tally(std::span<const Judgment> judgments, std::span<const SampleDraw> draws,
            std::string_view stratum, const PhaseSet& phases) {
  std::unordered_map<std::int64_t, const SampleDraw*> by_id;
  for (const auto& d : draws) by_id.emplace(d.draw_id, &d);

  // Latest revision per selected draw.
  std::unordered_map<std::int64_t, const Judgment*> verdicts;
  for (const auto& j : judgments) {
    const auto it = by_id.find(j.draw_id);
    if (it == by_id.end()) {
      fail(ErrorCode::kInvalidArgument,
           fmt::format("judgment references unknown draw {}", j.draw_id));
    }
    const auto& d = *it->second;
    if (d.stratum != stratum || !phases.contains(d.phase)) continue;
    auto [slot, inserted] = verdicts.emplace(j.draw_id, &j);
    if (!inserted && j.revision > slot->second->revision) slot->second = &j;
  }

  Tally t;
  std::vector<std::int64_t> pending;
  for (const auto& d : draws) {
    if (d.stratum != stratum || !phases.contains(d.phase)) continue;
    const auto it = verdicts.find(d.draw_id);
    if (it == verdicts.end()) {
      pending.push_back(d.draw_id);
      continue;
    }
    ++t.trials;
    if (it->second->verdict == Verdict::kMatch) ++t.successes;
  }
  if (!pending.empty()) throw PendingJudgmentsError(std::move(pending));
  return t;
}

nlohmann::json to_json(const SampleDraw& d) {
  return {{"draw_id", d.draw_id},
          {"stratum", d.stratum},
          {"doc_id", d.doc_id},
          {"phase", to_string(d.phase)}};
}

SampleDraw draw_from_json(const nlohmann::json& j) {
  return {j.at("draw_id").get<std::int64_t>(), j.at("stratum").get<std::string>(),
          j.at("doc_id").get<std::string>(),
          phase_from_string(j.at("phase").get<std::string>())};
}

nlohmann::json to_json(const Judgment& j) {
  nlohmann::json out = {{"draw_id", j.draw_id},
                        {"verdict", to_string(j.verdict)},
                        {"reviewer", j.reviewer},
                        {"timestamp", j.timestamp},
                        {"revision", j.revision}};
  if (j.note) out["note"] = *j.note;
  if (j.auto_filled) out["auto_filled"] = true;
  return out;
}

Judgment judgment_from_json(const nlohmann::json& j) {
  Judgment out;
  out.draw_id = j.at("draw_id").get<std::int64_t>();
  out.verdict = verdict_from_string(j.at("verdict").get<std::string>());
  out.reviewer = j.value("reviewer", std::string{});
  out.timestamp = j.value("timestamp", std::string{});
  if (j.contains("note") && !j["note"].is_null()) out.note = j["note"].get<std::string>();
  out.revision = j.value("revision", 0);
  out.auto_filled = j.value("auto_filled", false);
  return out;
}

}  // namespace corpstat
