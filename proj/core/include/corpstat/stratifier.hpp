#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpstat/corpus.hpp"

namespace corpstat {

// A cheap objective test. When both a pattern and a line limit are given the
// document must satisfy both.
struct StratificationRule {
  std::string rule_id;
  std::optional<std::string> pattern;  // Perl-syntax regular expression
  std::optional<std::size_t> max_lines;
  std::string target_stratum;
  int priority = 0;  // evaluated in ascending order; first match wins
};

class RuleSet {
 public:
  // Compiles every pattern; throws kConfig on an invalid expression,
  // duplicate priority, a rule with neither test, or an empty default.
  // match_prefix_bytes bounds how much of each document patterns see
  // (0 = whole document).
  RuleSet(std::vector<StratificationRule> rules, std::string default_stratum,
          std::size_t match_prefix_bytes = 0);
  ~RuleSet();
  RuleSet(const RuleSet&);
  RuleSet& operator=(const RuleSet&);
  RuleSet(RuleSet&&) noexcept;
  RuleSet& operator=(RuleSet&&) noexcept;

  static RuleSet from_json(const nlohmann::json& j);
  static RuleSet load(const std::string& path);
  nlohmann::json to_json() const;

  const std::vector<StratificationRule>& rules() const noexcept { return rules_; }
  const std::string& default_stratum() const noexcept { return default_stratum_; }
  std::size_t match_prefix_bytes() const noexcept { return match_prefix_bytes_; }

  // Stratum labels: rule targets in priority order, then the default.
  std::vector<std::string> labels() const;

  // Pure in (text, line_count).
  const std::string& classify(std::string_view text, std::size_t line_count) const;

 private:
  struct Compiled;
  void compile();

  std::vector<StratificationRule> rules_;
  std::string default_stratum_;
  std::size_t match_prefix_bytes_ = 0;
  std::vector<std::shared_ptr<const Compiled>> compiled_;
};

const std::string& classify(const Document& doc, const Corpus& corpus,
                            const RuleSet& rules);

struct Stratum {
  std::string label;
  std::vector<std::string> doc_ids;  // corpus order
  double fraction = 0.0;             // count / total_count

  std::size_t count() const noexcept { return doc_ids.size(); }
  bool empty() const noexcept { return doc_ids.empty(); }
};

struct StratumPartition {
  std::vector<Stratum> strata;
  std::string default_stratum;
  std::size_t total_count = 0;

  const Stratum& at(std::string_view label) const;  // throws kNotFound
  bool contains(std::string_view label) const noexcept;
  std::vector<std::string> empty_strata() const;
};

StratumPartition stratify_corpus(const Corpus& corpus, const RuleSet& rules);

// With include_doc_ids = false only labels, counts and fractions are kept.
nlohmann::json to_json(const StratumPartition& partition, bool include_doc_ids = true);
StratumPartition partition_from_json(const nlohmann::json& j);

}  // namespace corpstat
