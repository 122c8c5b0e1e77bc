#include "corpstat/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "corpstat/campaign.hpp"
#include "corpstat/errors.hpp"
#include "corpstat/http_api.hpp"
#include "corpstat/random.hpp"
#include "corpstat/report.hpp"

namespace fs = std::filesystem;

namespace corpstat {

namespace {

struct Options {
  std::vector<std::string> corpus;
  std::string rules;
  std::string out_path;
  std::string campaign_dir;
  std::string question = CampaignConfig{}.question;
  double grid_step = 1e-5;
  std::int64_t mc_draws = kDefaultMcDraws;
  std::uint64_t seed = 0;
  std::int64_t budget = 0;
  double mass = 0.95;
  std::vector<std::string> costs;
  std::vector<std::string> counts;
  std::int64_t each = -1;
  std::string phase;
  std::string stratum;
  bool uniform = false;
  bool flat = false;
  std::string points_path;
  std::string reviewer;
  std::int64_t draw_id = 0;
  std::string verdict;
  std::string note;
  bool correct = false;
  std::string format = "text";
  bool verify = false;
  std::string addr = "127.0.0.1:8080";
  std::string static_dir;
};

std::map<std::string, std::string> parse_pairs(const std::vector<std::string>& items,
                                               std::string_view what) {
  std::map<std::string, std::string> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
      fail(ErrorCode::kInvalidArgument,
           fmt::format("{} must look like label=value, got '{}'", what, item));
    }
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& s, std::string_view what) {
  try {
    std::size_t used = 0;
    T v;
    if constexpr (std::is_floating_point_v<T>) {
      v = static_cast<T>(std::stod(s, &used));
    } else {
      v = static_cast<T>(std::stoll(s, &used));
    }
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    fail(ErrorCode::kInvalidArgument, fmt::format("{}: '{}' is not a number", what, s));
  }
}

std::string default_reviewer() {
  for (const char* var : {"CORPSTAT_REVIEWER", "USER"}) {
    if (const char* v = std::getenv(var); v && *v) return v;
  }
  return "cli";
}

std::vector<fs::path> to_paths(const std::vector<std::string>& items) {
  return {items.begin(), items.end()};
}

void print_partition(std::ostream& out, const StratumPartition& p) {
  fmt::print(out, "{:<24} {:>10} {:>10}\n", "stratum", "documents", "fraction");
  for (const auto& s : p.strata) {
    fmt::print(out, "{:<24} {:>10} {:>10.6f}{}\n", s.label, s.count(), s.fraction,
               s.empty() ? "  (empty)" : "");
  }
  fmt::print(out, "{:<24} {:>10}\n", "total", p.total_count);
}

std::uint64_t resolve_seed(const CLI::Option* opt, const Options& o, std::ostream& out) {
  if (opt->count() > 0) return o.seed;
  const auto seed = generate_seed();
  fmt::print(out, "seed {} (generated; pass --seed {} to reproduce)\n", seed, seed);
  return seed;
}

// --- commands --------------------------------------------------------------

int cmd_ingest(const Options& o, std::ostream& out, std::ostream& err) {
  const auto corpus = ingest_corpus(to_paths(o.corpus));
  for (const auto& w : corpus.warnings()) fmt::print(err, "warning: {}\n", w);
  fmt::print(out, "ingested {} file(s), {} document(s); corpus id {}\n", corpus.files().size(),
             corpus.total_count(), corpus.corpus_id());
  if (!o.out_path.empty()) {
    write_file_atomic(o.out_path, dump_json(to_json(corpus)) + "\n");
    fmt::print(out, "index written to {}\n", o.out_path);
  }
  return 0;
}

int cmd_stratify(const Options& o, std::ostream& out, std::ostream& err) {
  const auto rules = RuleSet::load(o.rules);
  const auto corpus = ingest_corpus(to_paths(o.corpus));
  for (const auto& w : corpus.warnings()) fmt::print(err, "warning: {}\n", w);
  const auto partition = stratify_corpus(corpus, rules);
  print_partition(out, partition);
  if (!o.out_path.empty()) {
    write_file_atomic(o.out_path, dump_json(to_json(partition), 1) + "\n");
  }
  return 0;
}

int cmd_init(const Options& o, std::ostream& out, std::ostream& err) {
  // Validate everything before writing anything.
  const auto rules = RuleSet::load(o.rules);
  CampaignConfig config;
  config.question = o.question;
  config.grid_intervals = Grid::with_step(o.grid_step).intervals();
  config.mc_draws = o.mc_draws;
  for (const auto& [label, value] : parse_pairs(o.costs, "--cost")) {
    const double c = parse_number<double>(value, "--cost");
    if (!(c > 0.0)) fail(ErrorCode::kInvalidArgument, "--cost values must be positive");
    config.costs[label] = c;
  }
  const auto corpus = ingest_corpus(to_paths(o.corpus));
  for (const auto& w : corpus.warnings()) fmt::print(err, "warning: {}\n", w);
  const auto campaign = Campaign::create(o.campaign_dir, config, corpus, rules);
  fmt::print(out, "created campaign {} in {}\n", campaign.campaign_id(),
             campaign.dir().string());
  print_partition(out, campaign.partition());
  return 0;
}

int cmd_prior(const Options& o, std::ostream& out) {
  auto campaign = Campaign::open(o.campaign_dir);
  const int chosen = int{o.uniform} + int{o.flat} + int{!o.points_path.empty()};
  if (chosen != 1) {
    fail(ErrorCode::kInvalidArgument, "give exactly one of --uniform, --flat, --points");
  }
  if (o.uniform) {
    campaign.set_prior(o.stratum, std::nullopt);
    fmt::print(out, "prior for {}: uniform\n", o.stratum);
    return 0;
  }
  ElicitedPrior prior = o.flat ? flat_elicitation() : [&] {
    const auto j = read_json_file(o.points_path);
    try {
      return elicited_prior_from_json(j.is_array() ? nlohmann::json{{"points", j}} : j);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kValidation, fmt::format("{}: {}", o.points_path, e.what()));
    }
  }();
  if (prior.reviewer.empty()) prior.reviewer = o.reviewer.empty() ? default_reviewer() : o.reviewer;
  campaign.set_prior(o.stratum, prior);
  const auto d = campaign.prior_density(o.stratum);
  fmt::print(out, "prior for {}: elicited, {} points; mean {:.5f}\n", o.stratum,
             prior.points.size(), mean(d));
  return 0;
}

int cmd_draw(const Options& o, const CLI::Option* seed_opt, std::ostream& out) {
  auto campaign = Campaign::open(o.campaign_dir);
  const Phase phase = phase_from_string(o.phase);
  std::map<std::string, std::int64_t> counts;
  if (o.each >= 0) {
    for (const auto& s : campaign.partition().strata) {
      if (!s.empty()) counts[s.label] = o.each;
    }
  }
  for (const auto& [label, value] : parse_pairs(o.counts, "--count")) {
    campaign.partition().at(label);
    counts[label] = parse_number<std::int64_t>(value, "--count");
  }
  const auto seed = resolve_seed(seed_opt, o, out);
  const auto drawn = campaign.run_phase(phase, counts, seed);
  std::map<std::string, std::int64_t> per;
  for (const auto& d : drawn) ++per[d.stratum];
  fmt::print(out, "{} draws for phase {}:", drawn.size(), to_string(phase));
  for (const auto& [label, n] : per) fmt::print(out, " {}={}", label, n);
  fmt::print(out, "\n");
  for (const auto& d : drawn) {
    const auto j = campaign.judgment(d.draw_id);
    fmt::print(out, "{:>6}  {:<20} {}{}\n", d.draw_id, d.stratum, d.doc_id,
               j ? fmt::format("  (repeat; {} copied)", to_string(j->verdict)) : "");
  }
  return 0;
}

int cmd_plan(const Options& o, std::ostream& out) {
  auto campaign = Campaign::open(o.campaign_dir);
  if (o.budget < 0) fail(ErrorCode::kInvalidArgument, "--budget must be >= 0");
  const auto plan = campaign.plan(o.budget);
  fmt::print(out, "{:<24} {:>10} {:>10} {:>14} {:>10} {:>8}\n", "stratum", "fraction",
             "presample", "A factor", "q", "count");
  for (const auto& a : plan.per_stratum) {
    const auto& st = campaign.partition().at(a.label);
    const auto t = campaign.tally(a.label, Phase::kPresample);
    fmt::print(out, "{:<24} {:>10.6f} {:>10} {:>14.6e} {:>10.6f} {:>8}\n", a.label, st.fraction,
               fmt::format("{}/{}", t.successes, t.trials), a.a_factor, a.q, a.count);
  }
  fmt::print(out, "{:<24} {:>57}\n", "total", plan.total_budget);
  if (!plan.residual_note.empty()) fmt::print(out, "note: {}\n", plan.residual_note);
  return 0;
}

void show_draw(const Campaign& c, const SampleDraw& d, bool full, std::ostream& out) {
  const auto& doc = c.corpus().find(d.doc_id);
  const auto text = sanitize_text(c.corpus().text(doc));
  fmt::print(out, "\n=== draw {} | {} | stratum {} | {} ({} lines{}) ===\n", d.draw_id,
             to_string(d.phase), d.stratum, d.doc_id, doc.line_count,
             doc.truncated ? ", truncated" : "");
  if (full) {
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
    return;
  }
  const auto ex = first_lines(text, kReadingLines);
  out << ex.head;
  if (!ex.head.empty() && ex.head.back() != '\n') out << '\n';
  if (ex.has_more) {
    fmt::print(out, "... {} more line(s); 'm' shows the whole document\n",
               doc.line_count > kReadingLines ? doc.line_count - kReadingLines : 0);
  }
}

int cmd_judge(const Options& o, const CLI::Option* draw_opt, std::istream& in,
              std::ostream& out) {
  auto campaign = Campaign::open(o.campaign_dir);
  const auto reviewer = o.reviewer.empty() ? default_reviewer() : o.reviewer;
  std::optional<std::string> note;
  if (!o.note.empty()) note = o.note;

  if (draw_opt->count() > 0) {
    if (o.verdict.empty()) fail(ErrorCode::kInvalidArgument, "--draw-id needs --verdict");
    const auto j = campaign.record_judgment(o.draw_id, verdict_from_string(o.verdict), reviewer,
                                            note, o.correct);
    fmt::print(out, "draw {}: {} (revision {}); {} pending\n", j.draw_id, to_string(j.verdict),
               j.revision, campaign.pending_draw_ids().size());
    return 0;
  }
  if (!o.verdict.empty() || o.correct) {
    fail(ErrorCode::kInvalidArgument, "--verdict and --correct need --draw-id");
  }

  std::set<std::int64_t> skipped;
  int judged = 0;
  while (true) {
    campaign.refresh();
    std::optional<std::int64_t> next;
    for (const auto id : campaign.pending_draw_ids()) {
      if (!skipped.contains(id)) {
        next = id;
        break;
      }
    }
    if (!next) break;
    const auto& d = campaign.draw(*next);
    bool full = false;
    std::optional<Verdict> verdict;
    bool stop = false;
    while (!verdict && !stop) {
      show_draw(campaign, d, full, out);
      fmt::print(out, "{}\n[y] match  [n] no match  [s] skip  [m] more  [q] quit > ",
                 campaign.config().question);
      out.flush();
      std::string answer;
      if (!std::getline(in, answer)) {
        stop = true;
        break;
      }
      answer.erase(0, answer.find_first_not_of(" \t\r"));
      answer.erase(answer.find_last_not_of(" \t\r") + 1);
      if (answer == "y" || answer == "yes") {
        verdict = Verdict::kMatch;
      } else if (answer == "n" || answer == "no") {
        verdict = Verdict::kNoMatch;
      } else if (answer == "s" || answer == "skip") {
        skipped.insert(*next);
        break;
      } else if (answer == "m" || answer == "more") {
        full = true;
      } else if (answer == "q" || answer == "quit") {
        stop = true;
      } else {
        fmt::print(out, "unrecognized answer '{}'\n", answer);
      }
    }
    if (stop) break;
    if (verdict) {
      campaign.record_judgment(*next, *verdict, reviewer, note);
      ++judged;
    }
  }
  fmt::print(out, "\n{} judged this session; {} pending; state {}\n", judged,
             campaign.pending_draw_ids().size(), to_string(campaign.state()));
  return 0;
}

int cmd_estimate(const Options& o, const CLI::Option* seed_opt, const CLI::Option* mc_opt,
                 std::ostream& out) {
  auto campaign = Campaign::open(o.campaign_dir);
  if (const auto pending = campaign.pending_draw_ids(); !pending.empty()) {
    throw PendingJudgmentsError(pending);
  }
  if (!(o.mass > 0.0 && o.mass < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "--mass must lie strictly between 0 and 1");
  }
  const auto seed = resolve_seed(seed_opt, o, out);
  std::optional<std::int64_t> draws;
  if (mc_opt->count() > 0) draws = o.mc_draws;
  const auto e = campaign.finalize(o.mass, seed, draws);
  fmt::print(out, "result {} for campaign {}\n", campaign.results().size(),
             campaign.campaign_id());
  fmt::print(out, "mean                 {:.5f}\n", e.mean);
  fmt::print(out, "{:g}% interval        [{:.5f}, {:.5f}]\n", 100.0 * e.mass, e.interval.lo,
             e.interval.hi);
  fmt::print(out, "document interval    [{}, {}] of {}\n", e.doc_lo, e.doc_hi, e.corpus_size);
  fmt::print(out, "document width       {}\n", e.doc_width());
  if (e.weighted_mean_check) {
    fmt::print(out, "weighted sample mean {:.5f}\n", *e.weighted_mean_check);
  }
  fmt::print(out, "monte carlo draws    {}\n", e.mc_draws);
  return 0;
}

int cmd_report(const Options& o, std::ostream& out) {
  auto campaign = Campaign::open(o.campaign_dir);
  if (o.verify) {
    const auto check = campaign.verify_replay();
    if (!check.ok) {
      std::string joined;
      for (const auto& m : check.mismatches) joined += (joined.empty() ? "" : "; ") + m;
      fail(ErrorCode::kState, "replay mismatch: " + joined);
    }
  }
  if (o.format == "json") {
    out << dump_json(render_json_report(campaign), 2) << '\n';
  } else {
    out << render_text_report(campaign);
    if (o.verify) fmt::print(out, "\nreplay verified: results reproduce bitwise\n");
  }
  return 0;
}

int cmd_serve(const Options& o, std::ostream& out) {
  ServerOptions so;
  const auto colon = o.addr.rfind(':');
  if (colon == std::string::npos) fail(ErrorCode::kInvalidArgument, "--addr must be host:port");
  so.host = o.addr.substr(0, colon);
  so.port = static_cast<int>(parse_number<long long>(o.addr.substr(colon + 1), "--addr port"));
  so.static_dir = o.static_dir;
  CampaignService service(o.campaign_dir);
  ApiServer server(service, so);
  const int port = server.bind();
  fmt::print(out, "serving {} on http://{}:{}\n", o.campaign_dir, so.host, port);
  out.flush();
  server.listen();
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out,
            std::ostream& err) {
  Options o;
  CLI::App app{"Bayesian stratified estimation of match fractions in document corpora",
               "corpstat"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "corpstat 0.1.0");

  auto campaign_dir = [&](CLI::App* sub) {
    sub->add_option("--campaign-dir", o.campaign_dir, "Campaign directory")
        ->envname("CORPSTAT_CAMPAIGN_DIR")
        ->required();
  };
  auto corpus = [&](CLI::App* sub) {
    sub->add_option("--corpus", o.corpus, "Corpus files or directories")
        ->envname("CORPSTAT_CORPUS")
        ->required()
        ->delimiter(',');
  };
  auto rules = [&](CLI::App* sub) {
    sub->add_option("--rules", o.rules, "Stratification rules (JSON)")
        ->envname("CORPSTAT_RULES")
        ->required()
        ->check(CLI::ExistingFile);
  };
  auto seed = [&](CLI::App* sub) {
    return sub->add_option("--seed", o.seed, "Random seed (generated and printed if omitted)")
        ->envname("CORPSTAT_SEED");
  };
  auto reviewer = [&](CLI::App* sub) {
    sub->add_option("--reviewer", o.reviewer, "Reviewer id")->envname("CORPSTAT_REVIEWER");
  };

  auto* ingest = app.add_subcommand("ingest", "Split corpus files into documents");
  corpus(ingest);
  ingest->add_option("--out", o.out_path, "Write the corpus index here");

  auto* stratify = app.add_subcommand("stratify", "Apply rules and report stratum sizes");
  corpus(stratify);
  rules(stratify);
  stratify->add_option("--out", o.out_path, "Write the partition here");

  auto* init = app.add_subcommand("init", "Create a campaign directory");
  campaign_dir(init);
  corpus(init);
  rules(init);
  init->add_option("--question", o.question, "The question reviewers answer");
  init->add_option("--grid-step", o.grid_step, "Grid spacing (1/step must be an integer)")
      ->envname("CORPSTAT_GRID_STEP");
  init->add_option("--mc-draws", o.mc_draws, "Monte Carlo draws for combination")
      ->envname("CORPSTAT_MC_DRAWS")
      ->check(CLI::PositiveNumber);
  init->add_option("--cost", o.costs, "Per-document cost, label=value (default 1)");

  auto* prior = app.add_subcommand("prior", "Set a stratum prior before allocation");
  campaign_dir(prior);
  reviewer(prior);
  prior->add_option("--stratum", o.stratum, "Stratum label")->required();
  prior->add_flag("--uniform", o.uniform, "Non-informative prior");
  prior->add_flag("--flat", o.flat, "Eleven equal points (same as uniform, recorded as elicited)");
  prior->add_option("--points", o.points_path, "JSON file with [[x, likelihood], ...]")
      ->check(CLI::ExistingFile);

  auto* draw = app.add_subcommand("draw", "Draw documents for a sampling phase");
  campaign_dir(draw);
  auto* draw_seed = seed(draw);
  draw->add_option("--phase", o.phase, "presample | full | extension")->required();
  draw->add_option("--count", o.counts, "New draws for a stratum, label=n");
  draw->add_option("--each", o.each, "New draws for every non-empty stratum")
      ->check(CLI::NonNegativeNumber);

  auto* plan = app.add_subcommand("plan", "Allocate the sampling budget across strata");
  campaign_dir(plan);
  plan->add_option("--budget", o.budget, "Total sample size")
      ->envname("CORPSTAT_BUDGET")
      ->required();

  auto* judge = app.add_subcommand("judge", "Record judgments (interactive unless --draw-id)");
  campaign_dir(judge);
  reviewer(judge);
  auto* draw_id = judge->add_option("--draw-id", o.draw_id, "Judge this draw non-interactively");
  judge->add_option("--verdict", o.verdict, "match | no_match (also y/n)");
  judge->add_option("--note", o.note, "Free-text note");
  judge->add_flag("--correct", o.correct, "Supersede an existing judgment");

  auto* estimate = app.add_subcommand("estimate", "Finalize: combined posterior and interval");
  campaign_dir(estimate);
  auto* estimate_seed = seed(estimate);
  estimate->add_option("--mass", o.mass, "Credibility mass")->envname("CORPSTAT_MASS");
  auto* mc = estimate->add_option("--mc-draws", o.mc_draws, "Override Monte Carlo draws")
                 ->envname("CORPSTAT_MC_DRAWS")
                 ->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "Render all finalized results");
  campaign_dir(report);
  report->add_option("--format", o.format, "text | json")
      ->check(CLI::IsMember({"text", "json"}));
  report->add_flag("--verify", o.verify, "Recompute every stored result from the event log");

  auto* serve = app.add_subcommand("serve", "Run the HTTP API in the foreground");
  campaign_dir(serve);
  serve->add_option("--addr", o.addr, "host:port to bind")->envname("CORPSTAT_ADDR");
  serve->add_option("--static", o.static_dir, "Review UI assets to serve under /ui")
      ->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion& e) {
    out << e.what() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    fmt::print(err, "error: usage: {}\n", e.what());
    return 2;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(o, out, err);
    if (stratify->parsed()) return cmd_stratify(o, out, err);
    if (init->parsed()) return cmd_init(o, out, err);
    if (prior->parsed()) return cmd_prior(o, out);
    if (draw->parsed()) return cmd_draw(o, draw_seed, out);
    if (plan->parsed()) return cmd_plan(o, out);
    if (judge->parsed()) return cmd_judge(o, draw_id, in, out);
    if (estimate->parsed()) return cmd_estimate(o, estimate_seed, mc, out);
    if (report->parsed()) return cmd_report(o, out);
    if (serve->parsed()) return cmd_serve(o, out);
  } catch (const Error& e) {
    fmt::print(err, "error: {}: {}\n", to_string(e.code()), e.what());
    return 1;
  } catch (const std::exception& e) {
    fmt::print(err, "error: internal: {}\n", e.what());
    return 1;
  }
  return 2;
}

}  // namespace corpstat
