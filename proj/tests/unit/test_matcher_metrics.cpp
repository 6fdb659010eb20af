#include <gtest/gtest.h>

#include <cmath>

#include "fairvec/error.hpp"
#include "fairvec/matcher_metrics.hpp"
#include "oracles.hpp"

namespace fairvec {
namespace {

ScoredPairs as_scored(const oracle::Scored& s) { return {s.scores, s.labels}; }

PairList tags(const oracle::Scored& s, int k) {
  PairList list;
  list.scheme = k == 8 ? SubgroupScheme() : SubgroupScheme({Ethnicity::A, Ethnicity::B}, {Gender::F, Gender::M});
  for (std::size_t n = 0; n < s.scores.size(); ++n) {
    list.pairs.push_back({0, 1, s.labels[n] ? PairLabel::genuine : PairLabel::imposter, s.subgroup[n]});
    list.fold_of_pair.push_back(0);
  }
  list.num_folds = 1;
  return list;
}

TEST(Confusion, HandExample) {
  ScoredPairs s{{0.9, 0.8, 0.3, 0.2, 0.5}, {1, 0, 1, 0, 1}};
  const auto c = confusion(s, 0.5);
  EXPECT_EQ(c.tp, 1);
  EXPECT_EQ(c.fp, 1);
  EXPECT_EQ(c.tn, 1);
  EXPECT_EQ(c.fn, 2);  // 0.5 is not strictly above the threshold
  const auto r = rates(c);
  EXPECT_DOUBLE_EQ(r.tar, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.fnr, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.far, 0.5);
  EXPECT_DOUBLE_EQ(r.tnr, 0.5);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.4);
}

TEST(Confusion, RatesNeedBothClasses) {
  EXPECT_THROW(rates(confusion({{0.1, 0.2}, {1, 1}}, 0.0)), NumericError);
}

TEST(Calibration, SeparableScoresGiveFullAccuracy) {
  ScoredPairs s{{0.1, 0.2, 0.3, 0.7, 0.8}, {0, 0, 0, 1, 1}};
  const double t = calibrate_global(s);
  EXPECT_DOUBLE_EQ(t, 0.5);
  EXPECT_DOUBLE_EQ(rates(confusion(s, t)).accuracy, 1.0);
}

TEST(Calibration, SmallestThresholdWinsTies) {
  // Thresholds 0.15 and 0.35 both get 3 of 4 right.
  ScoredPairs s{{0.1, 0.2, 0.3, 0.4}, {0, 1, 0, 1}};
  EXPECT_DOUBLE_EQ(calibrate_global(s), 0.15);
}

TEST(Candidates, AdjacentDoublesFallBackToLowerScore) {
  const double a = 0.5;
  const double b = std::nextafter(a, 1.0);
  const auto c = threshold_candidates({{a, b}, {0, 1}});
  ASSERT_EQ(c.size(), 3u);
  EXPECT_DOUBLE_EQ(c[1], a);
  EXPECT_EQ(confusion({{a, b}, {0, 1}}, c[1]).tp, 1);
}

TEST(FarThreshold, AchievedFarNeverExceedsTarget) {
  Rng rng(3);
  const auto s = oracle::random_scored(rng, 800, 4, true);
  for (double target : {0.3, 0.1, 0.05, 0.01}) {
    const auto t = threshold_for_far(as_scored(s), target);
    EXPECT_LE(t.achieved_far, target);
    EXPECT_DOUBLE_EQ(t.threshold, oracle::far_threshold(s, target));
  }
}

TEST(FarThreshold, UnreachableTargetThrows) {
  ScoredPairs s{{0.1, 0.2, 0.9}, {0, 0, 1}};
  EXPECT_THROW(threshold_for_far(s, 0.1), NumericError);
  EXPECT_THROW(threshold_for_far(s, 1.5), InputError);
}

TEST(PercentError, SignsAndValues) {
  EXPECT_DOUBLE_EQ(percent_error(0.1, 0.05), 50.0);
  EXPECT_DOUBLE_EQ(percent_difference(0.1, 0.3), 200.0);
  EXPECT_DOUBLE_EQ(percent_difference(0.01, 0.0), -100.0);
  EXPECT_THROW(percent_error(0.0, 0.1), NumericError);
}

TEST(SubgroupAudit, HandCounts) {
  oracle::Scored s;
  s.scores = {0.6, 0.4, 0.7, 0.2, 0.9, 0.1, 0.8, 0.3, 0.1, 0.2, 0.9, 0.8};
  s.labels = {0, 0, 0, 0, 1, 1, 1, 1, 0, 1, 0, 1};
  s.subgroup = {0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 3, 3};
  const auto list = tags(s, 4);
  const auto audit = subgroup_far_audit(as_scored(s), list, 0.5);
  EXPECT_DOUBLE_EQ(audit.reported_far, 0.5);
  EXPECT_DOUBLE_EQ(audit.subgroups[0].actual_far, 0.5);
  EXPECT_DOUBLE_EQ(audit.subgroups[1].actual_far, 0.5);
  EXPECT_DOUBLE_EQ(audit.subgroups[2].actual_far, 0.0);
  EXPECT_DOUBLE_EQ(audit.subgroups[3].actual_far, 1.0);
  EXPECT_EQ(audit.subgroups[3].false_accepts, 1);
  EXPECT_DOUBLE_EQ(audit.subgroups[0].percent_difference, 0.0);
  EXPECT_DOUBLE_EQ(audit.subgroups[3].percent_difference, 100.0);
}

TEST(Summarize, NearestRankAndEvenMedian) {
  std::vector<double> v;
  for (int i = 1; i <= 20; ++i) v.push_back(i);
  const auto q = summarize(v);
  EXPECT_DOUBLE_EQ(q.mean, 10.5);
  EXPECT_DOUBLE_EQ(q.median, 10.5);
  EXPECT_DOUBLE_EQ(q.p5, 1.0);
  EXPECT_DOUBLE_EQ(q.p95, 19.0);
  EXPECT_DOUBLE_EQ(summarize({3.0, 1.0, 2.0}).median, 2.0);
  EXPECT_THROW(summarize({}), NumericError);
}

TEST(Det, EndsAndMonotone) {
  Rng rng(11);
  const auto s = oracle::random_scored(rng, 500, 2, false);
  const auto curve = det_curve(as_scored(s), 0);
  EXPECT_DOUBLE_EQ(curve.front().far, 1.0);
  EXPECT_DOUBLE_EQ(curve.front().fnr, 0.0);
  EXPECT_DOUBLE_EQ(curve.back().far, 0.0);
  EXPECT_DOUBLE_EQ(curve.back().fnr, 1.0);
  for (std::size_t n = 1; n < curve.size(); ++n) {
    EXPECT_LE(curve[n].far, curve[n - 1].far);
    EXPECT_GE(curve[n].fnr, curve[n - 1].fnr);
  }
  const auto thin = det_curve(as_scored(s), 25);
  ASSERT_EQ(thin.size(), 25u);
  EXPECT_DOUBLE_EQ(thin.front().threshold, curve.front().threshold);
  EXPECT_DOUBLE_EQ(thin.back().threshold, curve.back().threshold);
}

// Randomized equivalence with the brute-force oracle.
class OracleEquivalence : public ::testing::TestWithParam<int> {};

TEST_P(OracleEquivalence, MatchesBruteForce) {
  Rng rng(derive_seed(2024, static_cast<std::uint64_t>(GetParam())));
  const int k = GetParam() % 2 == 0 ? 8 : 4;
  const auto n = 40 + rng.below(961);
  const auto s = oracle::random_scored(rng, n, k, GetParam() % 3 == 0);
  const auto scored = as_scored(s);

  const auto cand = oracle::candidates(s);
  EXPECT_EQ(threshold_candidates(scored), cand);
  for (std::size_t i = 0; i < cand.size(); i += 7) {
    const auto mine = confusion(scored, cand[i]);
    const auto ref = oracle::count_at(s, cand[i]);
    ASSERT_EQ(mine.tp, ref.tp);
    ASSERT_EQ(mine.fp, ref.fp);
    ASSERT_EQ(mine.tn, ref.tn);
    ASSERT_EQ(mine.fn, ref.fn);
    const auto r = rates(mine);
    const auto o = oracle::rates_of(ref);
    EXPECT_NEAR(r.tar, o.tar, 1e-12);
    EXPECT_NEAR(r.far, o.far, 1e-12);
    EXPECT_NEAR(r.fnr, o.fnr, 1e-12);
    EXPECT_NEAR(r.tnr, o.tnr, 1e-12);
    EXPECT_NEAR(r.accuracy, o.acc, 1e-12);
  }
  const auto list = tags(s, k);
  const auto ts = calibrate_per_subgroup(scored, list);
  EXPECT_EQ(ts.global, oracle::best_threshold(s));
  for (int g = 0; g < k; ++g) {
    EXPECT_EQ(ts.per_subgroup[static_cast<std::size_t>(g)], oracle::best_threshold(oracle::only_subgroup(s, g)));
  }
  for (std::size_t points : {std::size_t{0}, std::size_t{17}}) {
    const auto mine = det_curve(scored, points);
    const auto ref = oracle::det(s, points);
    ASSERT_EQ(mine.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_EQ(mine[i].threshold, ref[i].threshold);
      EXPECT_NEAR(mine[i].far, ref[i].far, 1e-12);
      EXPECT_NEAR(mine[i].fnr, ref[i].fnr, 1e-12);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Random, OracleEquivalence, ::testing::Range(0, 20));

TEST(ScorePairs, CosineOfKnownVectors) {
  std::vector<Embedding> recs(3);
  recs[0] = {"a", 0, "1", {Ethnicity::A, Gender::F}, {1.0f, 0.0f}};
  recs[1] = {"b", 0, "1", {Ethnicity::A, Gender::F}, {1.0f, 1.0f}};
  recs[2] = {"c", 0, "2", {Ethnicity::A, Gender::F}, {0.0f, -3.0f}};
  const auto set = make_embedding_set(recs, 2, Provenance::loaded);
  PairList list;
  list.scheme = set.scheme;
  list.pairs = {{0, 1, PairLabel::genuine, 0}, {0, 2, PairLabel::imposter, 0}, {1, 2, PairLabel::imposter, 0}};
  list.fold_of_pair = {0, 0, 0};
  const auto s = score_pairs(set, list);
  EXPECT_NEAR(s.scores[0], std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(s.scores[1], 0.0, 1e-12);
  EXPECT_NEAR(s.scores[2], -std::sqrt(0.5), 1e-12);
}

}  // namespace
}  // namespace fairvec
