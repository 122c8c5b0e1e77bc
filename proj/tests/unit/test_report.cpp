#include <fmt/format.h>
#include <gtest/gtest.h>

#include "corpstat/errors.hpp"
#include "corpstat/report.hpp"
#include "test_support.hpp"

using namespace corpstat;
using corpstat::testing::judge_pending;
using corpstat::testing::make_campaign;
using corpstat::testing::TempDir;

namespace {

void finalize_twice(Campaign& c) {
  c.set_prior("real", flat_elicitation(3.0));
  c.run_phase(Phase::kPresample, {{"pseudo", 5}, {"real", 5}}, 21);
  judge_pending(c);
  c.plan(40);
  c.run_phase(Phase::kFull, {}, 22);
  judge_pending(c);
  c.finalize(0.95, 23);
  c.run_phase(Phase::kExtension, {{"real", 10}}, 24);
  judge_pending(c);
  c.finalize(0.9, 25);
}

}  // namespace

TEST(Report, NoResultsIsAStateError) {
  TempDir tmp;
  auto c = make_campaign(tmp.path());
  try {
    render_text_report(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kState);
  }
  EXPECT_THROW(render_json_report(c), Error);
}

TEST(Report, JsonCarriesEveryResultInOrder) {
  TempDir tmp;
  auto c = make_campaign(tmp.path());
  finalize_twice(c);
  const auto j = render_json_report(c);
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["campaign_id"], "campaign");
  EXPECT_EQ(j["corpus_size"], 120);
  EXPECT_EQ(j["strata"].size(), 2u);
  EXPECT_EQ(j["strata"][1]["prior"]["kind"], "elicited");
  EXPECT_EQ(j["strata"][0]["prior"]["kind"], "uniform");
  EXPECT_EQ(j["phases"].size(), 3u);
  EXPECT_EQ(j["phases"][2]["phase"], "extension");
  ASSERT_EQ(j["results"].size(), 2u);
  for (int i = 0; i < 2; ++i) {
    const auto& r = j["results"][i];
    const auto& stored = c.results()[i].summary;
    EXPECT_EQ(r["index"], i + 1);
    EXPECT_EQ(r["mean"], stored["mean"]);
    EXPECT_EQ(r["doc_interval"], stored["doc_interval"]);
    EXPECT_EQ(r["density_digest"], stored["density_digest"]);
    EXPECT_EQ(r["tallies"]["pseudo"]["successes"], 0);
  }
  EXPECT_EQ(j["results"][0]["mass"], 0.95);
  EXPECT_EQ(j["results"][1]["mass"], 0.9);
  EXPECT_EQ(j["results"][1]["seed"], 25);
  EXPECT_EQ(j["allocation"]["total_budget"], 40);
}

TEST(Report, TextHasSectionsAndOneRowPerResult) {
  TempDir tmp;
  auto c = make_campaign(tmp.path());
  finalize_twice(c);
  const auto text = render_text_report(c);
  for (const char* needle : {"Campaign campaign", "Question: Is this a real document?",
                             "Corpus: 120 documents", "Strata", "Sampling phases", "Results",
                             "allocation     budget 40", "extension 1", "elicited, 11 points",
                             "tallies: pseudo 0/", "weighted sample mean"}) {
    EXPECT_NE(text.find(needle), std::string::npos) << needle;
  }
  const auto& r = c.results()[1].summary;
  const std::string docs = fmt::format("[{}, {}]", r["doc_interval"][0].get<std::int64_t>(),
                                       r["doc_interval"][1].get<std::int64_t>());
  EXPECT_NE(text.find(docs), std::string::npos);
  std::size_t rows = 0;
  for (std::size_t pos = 0; (pos = text.find("tallies:", pos)) != std::string::npos; ++pos) ++rows;
  EXPECT_EQ(rows, 2u);
}
