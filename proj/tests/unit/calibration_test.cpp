#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "provaudit/calibration.hpp"
#include "provaudit/error.hpp"
#include "scenes.hpp"

using namespace provaudit;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr auto S = PairLabel::kSimilar;
constexpr auto D = PairLabel::kDissimilar;

// Similar at 0.1, 0.2, 0.4; dissimilar at 0.3, 0.5, 0.6.
std::vector<LabeledPair> six_pairs() {
  return {{0.5, D}, {0.1, S}, {0.3, D}, {0.6, D}, {0.4, S}, {0.2, S}};
}

std::vector<LabeledPair> random_pairs(std::mt19937_64& gen, std::size_t n, bool coarse) {
  std::vector<LabeledPair> out(n);
  for (auto& p : out) {
    p.label = gen() % 2 ? S : D;
    const double base = coarse ? static_cast<double>(gen() % 8) / 8.0 : scenes::unit(gen);
    p.distance = p.label == S ? base : base + 0.3 * scenes::unit(gen) * !coarse;
  }
  out[0].label = S;
  out[1].label = D;
  return out;
}

}  // namespace

TEST(Roc, HandBuiltSixPairs) {
  const auto pairs = six_pairs();
  const RocCurve c = compute_roc(pairs);
  const double t = 1.0 / 3, tt = 2.0 / 3;
  const std::vector<RocPoint> expected{{-kInf, 0, 0}, {0.1, t, 0},  {0.2, tt, 0}, {0.3, tt, t},
                                       {0.4, 1, t},   {0.5, 1, tt}, {0.6, 1, 1},  {kInf, 1, 1}};
  ASSERT_EQ(c.points.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(c.points[i].threshold, expected[i].threshold);
    EXPECT_DOUBLE_EQ(c.points[i].tpr, expected[i].tpr);
    EXPECT_DOUBLE_EQ(c.points[i].fpr, expected[i].fpr);
  }
  // 8 of 9 (similar, dissimilar) pairs are ordered correctly.
  EXPECT_DOUBLE_EQ(c.auc, 8.0 / 9.0);
}

TEST(Pr, HandBuiltSixPairs) {
  const auto pr = compute_pr(six_pairs());
  const std::vector<PrPoint> expected{{-kInf, 1, 0},       {0.1, 1, 1.0 / 3}, {0.2, 1, 2.0 / 3},
                                      {0.3, 2.0 / 3, 2.0 / 3}, {0.4, 0.75, 1},    {0.5, 0.6, 1},
                                      {0.6, 0.5, 1}};
  ASSERT_EQ(pr.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(pr[i].threshold, expected[i].threshold);
    EXPECT_DOUBLE_EQ(pr[i].precision, expected[i].precision);
    EXPECT_DOUBLE_EQ(pr[i].recall, expected[i].recall);
  }
}

TEST(SelectThreshold, PoliciesOnSixPairs) {
  const RocCurve c = compute_roc(six_pairs());

  // J = 2/3 at 0.2 and at 0.4; the stricter one wins.
  const DecisionThreshold y = select_threshold(c, ThresholdPolicy::youden());
  EXPECT_EQ(y.value, 0.2);
  EXPECT_DOUBLE_EQ(y.achieved_tpr, 2.0 / 3);
  EXPECT_EQ(y.achieved_fpr, 0.0);

  const DecisionThreshold f = select_threshold(c, ThresholdPolicy::target_fpr(0.34));
  EXPECT_EQ(f.value, 0.4);
  EXPECT_EQ(f.achieved_tpr, 1.0);
  EXPECT_DOUBLE_EQ(f.achieved_fpr, 1.0 / 3);

  const DecisionThreshold f0 = select_threshold(c, ThresholdPolicy::target_fpr(0.1));
  EXPECT_EQ(f0.value, 0.2);

  EXPECT_EQ(select_threshold(c, ThresholdPolicy::target_tpr(0.5)).value, 0.2);
  EXPECT_EQ(select_threshold(c, ThresholdPolicy::target_tpr(0.9)).value, 0.4);

  const DecisionThreshold x = select_threshold(c, ThresholdPolicy::fixed(0.35));
  EXPECT_EQ(x.value, 0.35);
  EXPECT_DOUBLE_EQ(x.achieved_tpr, 2.0 / 3);
  EXPECT_DOUBLE_EQ(x.achieved_fpr, 1.0 / 3);
  const DecisionThreshold x0 = select_threshold(c, ThresholdPolicy::fixed(0.05));
  EXPECT_EQ(x0.achieved_tpr, 0.0);
  EXPECT_EQ(x0.achieved_fpr, 0.0);
}

TEST(Roc, MatchesQuadraticSweepOracle) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 40; ++trial) {
    const auto pairs = random_pairs(gen, 2 + gen() % 200, trial % 2 == 0);
    std::set<double> distinct;
    double pos = 0, neg = 0;
    for (const auto& p : pairs) {
      distinct.insert(p.distance);
      (p.label == S ? pos : neg) += 1;
    }
    const RocCurve c = compute_roc(pairs);
    ASSERT_EQ(c.points.size(), distinct.size() + 2);
    std::size_t i = 1;
    for (double t : distinct) {
      double tp = 0, fp = 0;
      for (const auto& p : pairs) {
        if (p.distance <= t) (p.label == S ? tp : fp) += 1;
      }
      EXPECT_EQ(c.points[i].threshold, t);
      EXPECT_DOUBLE_EQ(c.points[i].tpr, tp / pos);
      EXPECT_DOUBLE_EQ(c.points[i].fpr, fp / neg);
      ++i;
    }
    // Mann-Whitney: a similar pair closer than a dissimilar one scores 1, a tie 1/2.
    double wins = 0;
    for (const auto& a : pairs) {
      if (a.label != S) continue;
      for (const auto& b : pairs) {
        if (b.label != D) continue;
        wins += a.distance < b.distance ? 1.0 : a.distance == b.distance ? 0.5 : 0.0;
      }
    }
    EXPECT_NEAR(c.auc, wins / (pos * neg), 1e-12) << "trial " << trial;
  }
}

TEST(Roc, SeparableIsExactlyOneAndTiedIsHalf) {
  std::vector<LabeledPair> sep, tied;
  for (int i = 0; i < 37; ++i) {
    sep.push_back({0.01 * i, S});
    sep.push_back({1.0 + 0.01 * i, D});
    tied.push_back({0.5, S});
    tied.push_back({0.5, D});
  }
  EXPECT_EQ(compute_roc(sep).auc, 1.0);
  EXPECT_EQ(compute_roc(tied).auc, 0.5);
  // Youden admits every similar pair and no dissimilar one.
  const DecisionThreshold y = select_threshold(compute_roc(sep), ThresholdPolicy::youden());
  EXPECT_EQ(y.value, 0.01 * 36);
  EXPECT_EQ(y.achieved_tpr, 1.0);
  EXPECT_EQ(y.achieved_fpr, 0.0);
}

TEST(Roc, InvertingLabelsComplementsAuc) {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto pairs = random_pairs(gen, 50, trial % 2 == 1);
    const double auc = compute_roc(pairs).auc;
    for (auto& p : pairs) p.label = p.label == S ? D : S;
    EXPECT_NEAR(compute_roc(pairs).auc, 1.0 - auc, 1e-12);
  }
}

TEST(Roc, RatesAreMonotoneInThreshold) {
  std::mt19937_64 gen(4);
  const RocCurve c = compute_roc(random_pairs(gen, 300, false));
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    EXPECT_LT(c.points[i - 1].threshold, c.points[i].threshold);
    EXPECT_LE(c.points[i - 1].tpr, c.points[i].tpr);
    EXPECT_LE(c.points[i - 1].fpr, c.points[i].fpr);
  }
}

TEST(Roc, DegenerateAndInvalidInputs) {
  const std::vector<LabeledPair> only_similar{{0.1, S}, {0.2, S}};
  EXPECT_THROW(compute_roc(only_similar), DegenerateLabelsError);
  EXPECT_THROW(compute_roc(std::vector<LabeledPair>{{0.1, D}}), DegenerateLabelsError);
  EXPECT_THROW(compute_roc(std::vector<LabeledPair>{}), DegenerateLabelsError);
  EXPECT_THROW(compute_roc(std::vector<LabeledPair>{{NAN, S}, {0.1, D}}), ConfigError);
  EXPECT_THROW(compute_roc(std::vector<LabeledPair>{{-0.1, S}, {0.1, D}}), ConfigError);
  EXPECT_THROW(compute_pr(std::vector<LabeledPair>{{0.1, D}}), DegenerateLabelsError);
}

TEST(Pr, AllSimilarHasUnitPrecision) {
  std::mt19937_64 gen(5);
  std::vector<LabeledPair> pairs(40);
  for (auto& p : pairs) p = {scenes::unit(gen), S};
  for (const auto& p : compute_pr(pairs)) EXPECT_EQ(p.precision, 1.0);
}

TEST(SelectThreshold, UnattainableTargetsReportFrontier) {
  // The closest pair is dissimilar, so every finite threshold has FPR >= 1/2.
  const std::vector<LabeledPair> pairs{{0.1, D}, {0.2, S}, {0.3, D}, {0.4, S}};
  const RocCurve c = compute_roc(pairs);
  try {
    select_threshold(c, ThresholdPolicy::target_fpr(0.25));
    FAIL();
  } catch (const UnattainablePolicyError& e) {
    EXPECT_EQ(e.frontier_fpr(), 0.5);
    EXPECT_EQ(e.frontier_tpr(), 0.0);
  }
  EXPECT_EQ(select_threshold(c, ThresholdPolicy::target_fpr(0.5)).value, 0.2);
}

TEST(ThresholdPolicy, ParseAndFormat) {
  EXPECT_EQ(ThresholdPolicy::parse("youden"), ThresholdPolicy::youden());
  EXPECT_EQ(ThresholdPolicy::parse("fpr:0.05"), ThresholdPolicy::target_fpr(0.05));
  EXPECT_EQ(ThresholdPolicy::parse("tpr:0.9"), ThresholdPolicy::target_tpr(0.9));
  EXPECT_EQ(ThresholdPolicy::parse("fixed:0.2"), ThresholdPolicy::fixed(0.2));
  for (const char* s : {"youden", "fpr:0.05", "tpr:0.9", "fixed:0.2", "fixed:0"}) {
    EXPECT_EQ(ThresholdPolicy::parse(s).to_string(), s);
  }
  for (const char* bad : {"", "best", "fpr:", "fpr:1", "fpr:0", "tpr:1.5", "fixed:-1",
                          "fixed:inf", "fpr:0.1x", "auc:0.5"}) {
    EXPECT_THROW(ThresholdPolicy::parse(bad), ConfigError) << bad;
  }
}

TEST(Decision, InclusiveThreshold) {
  DecisionThreshold t;
  t.value = 0.0;
  EXPECT_TRUE(is_replication(0.0, t));
  EXPECT_FALSE(is_replication(1e-12, t));
  t.value = 0.25;
  EXPECT_TRUE(is_replication(0.25, t));
  EXPECT_FALSE(is_replication(std::nextafter(0.25, 1.0), t));
}

TEST(Csv, RocAndPrFormats) {
  const auto pairs = six_pairs();
  const std::string roc = roc_to_csv(compute_roc(pairs));
  EXPECT_EQ(roc.rfind("threshold,tpr,fpr\n-inf,0,0\n0.1,", 0), 0u);
  EXPECT_NE(roc.find("\n0.6,1,1\ninf,1,1\n"), std::string::npos);
  const auto pr = compute_pr(pairs);
  EXPECT_EQ(pr_to_csv(pr).rfind("threshold,precision,recall\n-inf,1,0\n0.1,1,", 0), 0u);
  EXPECT_NE(pr_to_csv(pr).find("\n0.4,0.75,1\n"), std::string::npos);
}
