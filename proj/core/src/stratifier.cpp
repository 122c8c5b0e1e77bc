#include "corpstat/stratifier.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_map>

#include <boost/regex.hpp>
#include <fmt/format.h>

#include "corpstat/errors.hpp"

namespace corpstat {

struct RuleSet::Compiled {
  std::optional<boost::regex> pattern;
};

RuleSet::RuleSet(std::vector<StratificationRule> rules, std::string default_stratum,
                 std::size_t match_prefix_bytes)
    : rules_(std::move(rules)),
      default_stratum_(std::move(default_stratum)),
      match_prefix_bytes_(match_prefix_bytes) {
  compile();
}

RuleSet::~RuleSet() = default;
RuleSet::RuleSet(const RuleSet&) = default;
RuleSet& RuleSet::operator=(const RuleSet&) = default;
RuleSet::RuleSet(RuleSet&&) noexcept = default;
RuleSet& RuleSet::operator=(RuleSet&&) noexcept = default;

void RuleSet::compile() {
  if (default_stratum_.empty()) fail(ErrorCode::kConfig, "rules: default_stratum is required");
  std::set<int> priorities;
  std::set<std::string> ids;
  for (const auto& r : rules_) {
    if (r.rule_id.empty()) fail(ErrorCode::kConfig, "rules: every rule needs a rule_id");
    if (!ids.insert(r.rule_id).second) {
      fail(ErrorCode::kConfig, fmt::format("rules: duplicate rule_id '{}'", r.rule_id));
    }
    if (!r.pattern && !r.max_lines) {
      fail(ErrorCode::kConfig,
           fmt::format("rules: rule '{}' has neither pattern nor max_lines", r.rule_id));
    }
    if (r.target_stratum.empty()) {
      fail(ErrorCode::kConfig, fmt::format("rules: rule '{}' has no target_stratum", r.rule_id));
    }
    if (!priorities.insert(r.priority).second) {
      fail(ErrorCode::kConfig, fmt::format("rules: priority {} used twice", r.priority));
    }
  }
  std::stable_sort(rules_.begin(), rules_.end(),
                   [](const auto& a, const auto& b) { return a.priority < b.priority; });

  compiled_.clear();
  for (const auto& r : rules_) {
    auto c = std::make_shared<Compiled>();
    if (r.pattern) {
      try {
        c->pattern.emplace(*r.pattern, boost::regex::perl);
      } catch (const boost::regex_error& e) {
        fail(ErrorCode::kConfig, fmt::format("rules: rule '{}' has an invalid pattern '{}': {}",
                                             r.rule_id, *r.pattern, e.what()));
      }
    }
    compiled_.push_back(std::move(c));
  }
}

RuleSet RuleSet::from_json(const nlohmann::json& j) {
  try {
    if (!j.contains("default_stratum")) {
      fail(ErrorCode::kConfig, "rules: default_stratum is required");
    }
    std::vector<StratificationRule> rules;
    for (const auto& jr : j.at("rules")) {
      StratificationRule r;
      r.rule_id = jr.at("rule_id").get<std::string>();
      if (jr.contains("pattern") && !jr["pattern"].is_null()) {
        r.pattern = jr["pattern"].get<std::string>();
      }
      if (jr.contains("max_lines") && !jr["max_lines"].is_null()) {
        r.max_lines = jr["max_lines"].get<std::size_t>();
      }
      r.target_stratum = jr.at("target_stratum").get<std::string>();
      r.priority = jr.at("priority").get<int>();
      rules.push_back(std::move(r));
    }
    return RuleSet(std::move(rules), j.at("default_stratum").get<std::string>(),
                   j.value("match_prefix_bytes", std::size_t{0}));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("rules: ") + e.what());
  }
}

RuleSet RuleSet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read rules file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, fmt::format("rules file {}: {}", path, e.what()));
  }
  return from_json(j);
}

nlohmann::json RuleSet::to_json() const {
  auto rules = nlohmann::json::array();
  for (const auto& r : rules_) {
    nlohmann::json jr = {{"rule_id", r.rule_id},
                         {"target_stratum", r.target_stratum},
                         {"priority", r.priority}};
    if (r.pattern) jr["pattern"] = *r.pattern;
    if (r.max_lines) jr["max_lines"] = *r.max_lines;
    rules.push_back(std::move(jr));
  }
  return {{"rules", rules},
          {"default_stratum", default_stratum_},
          {"match_prefix_bytes", match_prefix_bytes_}};
}

std::vector<std::string> RuleSet::labels() const {
  std::vector<std::string> out;
  auto add = [&](const std::string& label) {
    if (std::find(out.begin(), out.end(), label) == out.end()) out.push_back(label);
  };
  for (const auto& r : rules_) add(r.target_stratum);
  add(default_stratum_);
  return out;
}

const std::string& RuleSet::classify(std::string_view text, std::size_t line_count) const {
  if (match_prefix_bytes_ > 0 && text.size() > match_prefix_bytes_) {
    text = text.substr(0, match_prefix_bytes_);
  }
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& rule = rules_[i];
    if (rule.max_lines && line_count > *rule.max_lines) continue;
    if (const auto& re = compiled_[i]->pattern) {
      if (!boost::regex_search(text.begin(), text.end(), *re)) continue;
    }
    return rule.target_stratum;
  }
  return default_stratum_;
}

const std::string& classify(const Document& doc, const Corpus& corpus,
                            const RuleSet& rules) {
  const std::string text = corpus.text_prefix(doc, rules.match_prefix_bytes());
  return rules.classify(text, doc.line_count);
}

// ---------------------------------------------------------------------------

const Stratum& StratumPartition::at(std::string_view label) const {
  for (const auto& s : strata) {
    if (s.label == label) return s;
  }
  fail(ErrorCode::kNotFound, fmt::format("unknown stratum '{}'", label));
}

bool StratumPartition::contains(std::string_view label) const noexcept {
  return std::any_of(strata.begin(), strata.end(),
                     [&](const auto& s) { return s.label == label; });
}

std::vector<std::string> StratumPartition::empty_strata() const {
  std::vector<std::string> out;
  for (const auto& s : strata) {
    if (s.empty()) out.push_back(s.label);
  }
  return out;
}

namespace {

void assign_fractions(StratumPartition& p) {
  for (auto& s : p.strata) {
    s.fraction = p.total_count == 0 ? 0.0
                                    : static_cast<double>(s.count()) /
                                          static_cast<double>(p.total_count);
  }
}

}  // namespace

StratumPartition stratify_corpus(const Corpus& corpus, const RuleSet& rules) {
  StratumPartition p;
  p.default_stratum = rules.default_stratum();
  p.total_count = corpus.total_count();
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& label : rules.labels()) {
    slot.emplace(label, p.strata.size());
    p.strata.push_back(Stratum{label, {}, 0.0});
  }
  for (const auto& doc : corpus.documents()) {
    const auto& label = classify(doc, corpus, rules);
    p.strata[slot.at(label)].doc_ids.push_back(doc.doc_id);
  }
  assign_fractions(p);
  return p;
}

nlohmann::json to_json(const StratumPartition& p, bool include_doc_ids) {
  auto strata = nlohmann::json::array();
  for (const auto& s : p.strata) {
    nlohmann::json js = {{"label", s.label}, {"count", s.count()}, {"fraction", s.fraction}};
    if (s.empty()) js["empty"] = true;
    if (include_doc_ids) js["doc_ids"] = s.doc_ids;
    strata.push_back(std::move(js));
  }
  return {{"schema_version", 1},
          {"default_stratum", p.default_stratum},
          {"total_count", p.total_count},
          {"strata", strata}};
}

StratumPartition partition_from_json(const nlohmann::json& j) {
  try {
    StratumPartition p;
    p.default_stratum = j.at("default_stratum").get<std::string>();
    p.total_count = j.at("total_count").get<std::size_t>();
    std::size_t seen = 0;
    for (const auto& js : j.at("strata")) {
      Stratum s;
      s.label = js.at("label").get<std::string>();
      s.doc_ids = js.at("doc_ids").get<std::vector<std::string>>();
      seen += s.doc_ids.size();
      p.strata.push_back(std::move(s));
    }
    if (seen != p.total_count) {
      fail(ErrorCode::kConfig, "partition: stratum sizes do not add up to total_count");
    }
    assign_fractions(p);
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("partition: ") + e.what());
  }
}

}  // namespace corpstat
