#include <algorithm>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "corpstat/errors.hpp"
#include "corpstat/sampler.hpp"

using namespace corpstat;

namespace {

std::vector<std::string> docs(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("d" + std::to_string(i));
  return out;
}

Judgment judge(std::int64_t id, Verdict v, int revision = 0) {
  Judgment j;
  j.draw_id = id;
  j.verdict = v;
  j.reviewer = "r";
  j.revision = revision;
  return j;
}

std::vector<SampleDraw> make_draws(const std::string& stratum, Phase phase, std::int64_t first,
                                   int count) {
  std::vector<SampleDraw> out;
  for (int i = 0; i < count; ++i) out.push_back({first + i, stratum, "x" + std::to_string(i), phase});
  return out;
}

}  // namespace

TEST(DrawWithReplacement, ZeroCountIsEmpty) {
  EXPECT_TRUE(draw_with_replacement(docs(3), 0, 1).empty());
  EXPECT_TRUE(draw_with_replacement({}, 0, 1).empty());
}

TEST(DrawWithReplacement, SingleDocumentForcesDuplicates) {
  const auto one = docs(1);
  const auto d = draw_with_replacement(one, 5, 42, {"s", Phase::kFull, 0, 100});
  ASSERT_EQ(d.size(), 5u);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(d[i].doc_id, "d0");
    EXPECT_EQ(d[i].draw_id, 100 + static_cast<std::int64_t>(i));
    EXPECT_EQ(d[i].stratum, "s");
    EXPECT_EQ(d[i].phase, Phase::kFull);
  }
}

TEST(DrawWithReplacement, Errors) {
  EXPECT_THROW(draw_with_replacement({}, 1, 1), Error);
  EXPECT_THROW(draw_with_replacement(docs(2), -1, 1), Error);
}

// Frozen from tests/oracles/sampler_picks.py.
TEST(DrawWithReplacement, MatchesReferencePicks) {
  const auto pool = docs(7);
  const auto d = draw_with_replacement(pool, 12, 2024, {"s", Phase::kPresample, 5, 1});
  const std::vector<int> want{0, 4, 3, 5, 1, 1, 0, 4, 4, 6, 4, 4};
  ASSERT_EQ(d.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_EQ(d[i].doc_id, pool[want[i]]);

  const auto big = docs(10000);
  const auto e = draw_with_replacement(big, 6, 99);
  const std::vector<int> want_big{7773, 8218, 3234, 287, 8720, 9904};
  for (std::size_t i = 0; i < want_big.size(); ++i) EXPECT_EQ(e[i].doc_id, big[want_big[i]]);
}

TEST(DrawWithReplacement, DeterministicAndStreamSeparated) {
  const auto pool = docs(500);
  const auto a = draw_with_replacement(pool, 50, 7, {"s", Phase::kFull, 1, 1});
  EXPECT_EQ(a, draw_with_replacement(pool, 50, 7, {"s", Phase::kFull, 1, 1}));
  EXPECT_NE(a, draw_with_replacement(pool, 50, 7, {"s", Phase::kFull, 2, 1}));
  EXPECT_NE(a, draw_with_replacement(pool, 50, 8, {"s", Phase::kFull, 1, 1}));
}

TEST(DrawWithReplacement, UniformByChiSquare) {
  constexpr int kDocs = 10000;
  const auto pool = docs(kDocs);
  std::vector<int> hits(kDocs, 0);
  std::int64_t total = 0;
  for (std::uint64_t rep = 0; rep < 1000; ++rep) {
    for (const auto& d : draw_with_replacement(pool, 200, rep)) {
      ++hits[std::stoi(d.doc_id.substr(1))];
      ++total;
    }
  }
  const double expected = static_cast<double>(total) / kDocs;
  double chi2 = 0.0;
  for (int h : hits) chi2 += (h - expected) * (h - expected) / expected;
  boost::math::chi_squared dist(kDocs - 1);
  const double critical = boost::math::quantile(boost::math::complement(dist, 0.001));
  EXPECT_LT(chi2, critical);
}

TEST(Tally, PaperPresampleAllNoMatch) {
  const auto draws = make_draws("pseudo", Phase::kPresample, 1, 10);
  std::vector<Judgment> js;
  for (const auto& d : draws) js.push_back(judge(d.draw_id, Verdict::kNoMatch));
  EXPECT_EQ(tally(js, draws, "pseudo", {Phase::kPresample}), (Tally{0, 10}));
}

TEST(Tally, MixedFixture) {
  const auto draws = make_draws("s", Phase::kFull, 1, 10);
  std::vector<Judgment> js;
  for (int i = 0; i < 10; ++i) js.push_back(judge(i + 1, i < 7 ? Verdict::kMatch : Verdict::kNoMatch));
  EXPECT_EQ(tally(js, draws, "s", {Phase::kFull}), (Tally{7, 10}));
}

TEST(Tally, EmptyPhase) {
  const auto draws = make_draws("s", Phase::kPresample, 1, 3);
  std::vector<Judgment> js;
  for (const auto& d : draws) js.push_back(judge(d.draw_id, Verdict::kMatch));
  EXPECT_EQ(tally(js, draws, "s", {Phase::kFull}), (Tally{0, 0}));
  EXPECT_EQ(tally(js, draws, "other", {Phase::kPresample}), (Tally{0, 0}));
}

TEST(Tally, PendingDrawsAreListed) {
  const auto draws = make_draws("s", Phase::kFull, 1, 4);
  const std::vector<Judgment> js{judge(2, Verdict::kMatch)};
  try {
    tally(js, draws, "s", {Phase::kFull});
    FAIL();
  } catch (const PendingJudgmentsError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPending);
    EXPECT_EQ(e.pending_draw_ids(), (std::vector<std::int64_t>{1, 3, 4}));
  }
}

TEST(Tally, UnknownDrawIsAnError) {
  const auto draws = make_draws("s", Phase::kFull, 1, 1);
  const std::vector<Judgment> js{judge(1, Verdict::kMatch), judge(9, Verdict::kMatch)};
  EXPECT_THROW(tally(js, draws, "s", {Phase::kFull}), Error);
}

TEST(Tally, HighestRevisionWins) {
  const auto draws = make_draws("s", Phase::kFull, 1, 2);
  const std::vector<Judgment> js{judge(1, Verdict::kMatch, 2), judge(1, Verdict::kNoMatch, 1),
                                 judge(2, Verdict::kNoMatch, 0), judge(2, Verdict::kMatch, 1)};
  EXPECT_EQ(tally(js, draws, "s", {Phase::kFull}), (Tally{2, 2}));
}

TEST(Tally, RepeatDrawsCountOncePerDraw) {
  std::vector<SampleDraw> draws{{1, "s", "same", Phase::kFull}, {2, "s", "same", Phase::kFull}};
  const std::vector<Judgment> js{judge(1, Verdict::kMatch), judge(2, Verdict::kMatch)};
  EXPECT_EQ(tally(js, draws, "s", {Phase::kFull}), (Tally{2, 2}));
}

TEST(Tally, CumulativeOverPhases) {
  auto draws = make_draws("s", Phase::kPresample, 1, 10);
  const auto full = make_draws("s", Phase::kFull, 11, 5);
  draws.insert(draws.end(), full.begin(), full.end());
  std::vector<Judgment> js;
  for (const auto& d : draws) js.push_back(judge(d.draw_id, Verdict::kNoMatch));
  EXPECT_EQ(tally(js, draws, "s", {Phase::kPresample, Phase::kFull}), (Tally{0, 15}));
}

// Property: any permutation of the judgments gives the same tally.
TEST(Tally, PermutationInvariant) {
  const auto draws = make_draws("s", Phase::kFull, 1, 30);
  std::vector<Judgment> js;
  for (int i = 0; i < 30; ++i) {
    js.push_back(judge(i + 1, i % 3 ? Verdict::kMatch : Verdict::kNoMatch));
    if (i % 5 == 0) js.push_back(judge(i + 1, Verdict::kMatch, 1));
  }
  const auto base = tally(js, draws, "s", {Phase::kFull});
  std::mt19937 rng(3);
  for (int k = 0; k < 20; ++k) {
    std::shuffle(js.begin(), js.end(), rng);
    EXPECT_EQ(tally(js, draws, "s", {Phase::kFull}), base);
  }
}

TEST(SamplerJson, RoundTripsAndParsing) {
  const SampleDraw d{7, "s", "fr1-3", Phase::kExtension};
  EXPECT_EQ(draw_from_json(to_json(d)), d);
  Judgment j = judge(7, Verdict::kMatch, 3);
  j.note = "ok";
  j.auto_filled = true;
  j.timestamp = "2024-01-01T00:00:00Z";
  const auto back = judgment_from_json(to_json(j));
  EXPECT_EQ(back.draw_id, 7);
  EXPECT_EQ(back.verdict, Verdict::kMatch);
  EXPECT_EQ(back.note, std::optional<std::string>("ok"));
  EXPECT_EQ(back.revision, 3);
  EXPECT_TRUE(back.auto_filled);
  EXPECT_EQ(back.timestamp, j.timestamp);
  EXPECT_EQ(verdict_from_string("y"), Verdict::kMatch);
  EXPECT_EQ(verdict_from_string("no_match"), Verdict::kNoMatch);
  EXPECT_THROW(verdict_from_string("maybe"), Error);
  EXPECT_EQ(phase_from_string("extension"), Phase::kExtension);
  EXPECT_THROW(phase_from_string("later"), Error);
}
