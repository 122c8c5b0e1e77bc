#include "corpstat/report.hpp"

#include <fmt/format.h>

#include "corpstat/errors.hpp"

namespace corpstat {

namespace {

constexpr int kReportSchemaVersion = 1;

void require_results(const Campaign& c) {
  if (c.results().empty()) {
    fail(ErrorCode::kState, fmt::format("campaign {} has no finalized result to report",
                                        c.campaign_id()));
  }
}

nlohmann::json prior_json(const Campaign& c, const std::string& label) {
  const auto& p = c.elicited_prior(label);
  if (!p) return {{"kind", "uniform"}};
  return {{"kind", "elicited"}, {"elicitation", to_json(*p)}};
}

std::string percent(double x) { return fmt::format("{:.3f}%", 100.0 * x); }

}  // namespace

nlohmann::json render_json_report(const Campaign& c) {
  require_results(c);
  nlohmann::json strata = nlohmann::json::array();
  for (const auto& st : c.partition().strata) {
    strata.push_back({{"label", st.label},
                      {"count", st.count()},
                      {"fraction", st.fraction},
                      {"prior", prior_json(c, st.label)}});
  }
  nlohmann::json phases = nlohmann::json::array();
  for (const auto& p : c.phases()) {
    phases.push_back({{"phase", to_string(p.phase)},
                      {"index", p.index},
                      {"seed", p.seed},
                      {"counts", p.counts},
                      {"draw_count", p.draw_count}});
  }
  nlohmann::json results = nlohmann::json::array();
  int row = 0;
  for (const auto& r : c.results()) {
    const auto& s = r.summary;
    nlohmann::json tallies = nlohmann::json::object();
    for (const auto& [label, t] : r.tallies) {
      tallies[label] = {{"successes", t.successes}, {"trials", t.trials}};
    }
    results.push_back({{"index", ++row},
                       {"mass", s.at("mass")},
                       {"mean", s.at("mean")},
                       {"interval", {{"lo", s.at("interval").at("lo")},
                                     {"hi", s.at("interval").at("hi")}}},
                       {"doc_interval", s.at("doc_interval")},
                       {"doc_width", s.at("doc_width")},
                       {"mc_draws", s.at("mc_draws")},
                       {"seed", s.at("seed")},
                       {"weighted_mean_check", s.at("weighted_mean_check")},
                       {"density_digest", s.at("density_digest")},
                       {"tallies", tallies}});
  }
  nlohmann::json j = {{"schema_version", kReportSchemaVersion},
                      {"campaign_id", c.campaign_id()},
                      {"question", c.config().question},
                      {"corpus_id", c.corpus().corpus_id()},
                      {"corpus_size", c.corpus().total_count()},
                      {"grid_step", c.grid().step()},
                      {"strata", strata},
                      {"phases", phases},
                      {"results", results}};
  j["allocation"] = c.current_plan() ? to_json(*c.current_plan()) : nlohmann::json();
  return j;
}

std::string render_text_report(const Campaign& c) {
  const auto j = render_json_report(c);
  std::string out;
  auto line = [&out](const std::string& s) {
    out += s;
    out += '\n';
  };

  line(fmt::format("Campaign {}", c.campaign_id()));
  line(fmt::format("Question: {}", c.config().question));
  line(fmt::format("Corpus: {} documents (index {})", c.corpus().total_count(),
                   c.corpus().corpus_id()));
  line(fmt::format("Grid step: {:g}", c.grid().step()));
  line("");

  line("Strata");
  line(fmt::format("  {:<24} {:>10} {:>10}  {}", "stratum", "documents", "fraction", "prior"));
  for (const auto& st : c.partition().strata) {
    const auto& p = c.elicited_prior(st.label);
    std::string prior = "uniform";
    if (p) {
      prior = fmt::format("elicited, {} points", p->points.size());
      if (!p->reviewer.empty()) prior += fmt::format(", by {}", p->reviewer);
      if (!p->timestamp.empty()) prior += fmt::format(" at {}", p->timestamp);
    }
    line(fmt::format("  {:<24} {:>10} {:>10.6f}  {}", st.label, st.count(), st.fraction, prior));
  }
  line("");

  line("Sampling phases");
  for (const auto& p : c.phases()) {
    std::string counts;
    for (const auto& [label, n] : p.counts) {
      if (!counts.empty()) counts += ", ";
      counts += fmt::format("{}={}", label, n);
    }
    const std::string name =
        p.index > 0 ? fmt::format("{} {}", to_string(p.phase), p.index) : to_string(p.phase);
    line(fmt::format("  {:<14} seed {:<20} draws {:<6} {}", name, p.seed, p.draw_count,
                     counts.empty() ? "-" : counts));
  }
  if (const auto& plan = c.current_plan()) {
    std::string alloc;
    for (const auto& a : plan->per_stratum) {
      if (!alloc.empty()) alloc += ", ";
      alloc += fmt::format("{}={}", a.label, a.count);
    }
    line(fmt::format("  allocation     budget {} -> {}", plan->total_budget, alloc));
  }
  line("");

  line("Results");
  line(fmt::format("  {:>3} {:>5} {:>9} {:>24} {:>20} {:>7} {:>9} {:>20}", "#", "mass", "mean",
                   "credibility interval", "document interval", "width", "mc draws", "seed"));
  for (const auto& r : j.at("results")) {
    const double lo = r.at("interval").at("lo").get<double>();
    const double hi = r.at("interval").at("hi").get<double>();
    const auto& di = r.at("doc_interval");
    line(fmt::format("  {:>3} {:>5.3g} {:>9.5f} {:>24} {:>20} {:>7} {:>9} {:>20}",
                     r.at("index").get<int>(), r.at("mass").get<double>(),
                     r.at("mean").get<double>(),
                     fmt::format("[{}, {}]", percent(lo), percent(hi)),
                     fmt::format("[{}, {}]", di.at(0).get<std::int64_t>(),
                                 di.at(1).get<std::int64_t>()),
                     r.at("doc_width").get<std::int64_t>(), r.at("mc_draws").get<std::int64_t>(),
                     r.at("seed").get<std::uint64_t>()));
    std::string tallies;
    for (const auto& [label, t] : r.at("tallies").items()) {
      if (!tallies.empty()) tallies += ", ";
      tallies += fmt::format("{} {}/{}", label, t.at("successes").get<int>(),
                             t.at("trials").get<int>());
    }
    line(fmt::format("      tallies: {}", tallies));
    if (!r.at("weighted_mean_check").is_null()) {
      line(fmt::format("      weighted sample mean: {:.5f}",
                       r.at("weighted_mean_check").get<double>()));
    }
  }
  return out;
}

}  // namespace corpstat
