#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "minerwatch/error.hpp"
#include "minerwatch/metrics.hpp"

using namespace minerwatch;

TEST(Metrics, Perfect) {
  const std::vector<int> y{0, 1, 2, 1, 0};
  const auto m = evaluate(y, y, 3);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.f1, 1.0);
}

TEST(Metrics, BinaryHandExample) {
  const auto m = evaluate(std::vector<int>{1, 1, 0, 0}, std::vector<int>{1, 0, 0, 0}, 2);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(m.class_precision[1], 1.0);
  EXPECT_DOUBLE_EQ(m.class_recall[1], 0.5);
  EXPECT_DOUBLE_EQ(m.class_precision[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.class_recall[0], 1.0);
  EXPECT_EQ(m.confusion(1, 0), 1);
  EXPECT_EQ(m.confusion(0, 0), 2);
}

TEST(Metrics, ThreeClassAgainstHandOracle) {
  // truth rows / prediction cols:
  //   [2 1 0]
  //   [0 1 1]
  //   [1 0 0]
  const std::vector<int> truth{0, 0, 0, 1, 1, 2};
  const std::vector<int> pred{0, 0, 1, 1, 2, 0};
  const auto m = evaluate(truth, pred, 3);
  const double p[] = {2.0 / 3.0, 0.5, 0.0};
  const double r[] = {2.0 / 3.0, 0.5, 0.0};
  const double support[] = {3, 2, 1};
  double wp = 0, wr = 0, wf = 0;
  for (int k = 0; k < 3; ++k) {
    const double f = p[k] + r[k] > 0 ? 2 * p[k] * r[k] / (p[k] + r[k]) : 0.0;
    wp += support[k] * p[k] / 6;
    wr += support[k] * r[k] / 6;
    wf += support[k] * f / 6;
    EXPECT_DOUBLE_EQ(m.class_precision[k], p[k]);
    EXPECT_DOUBLE_EQ(m.class_recall[k], r[k]);
  }
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(m.precision, wp);
  EXPECT_DOUBLE_EQ(m.recall, wr);
  EXPECT_DOUBLE_EQ(m.f1, wf);
  EXPECT_DOUBLE_EQ(m.recall, m.accuracy);
}

TEST(Metrics, ZeroOverZeroIsZero) {
  const auto m = evaluate(std::vector<int>{0, 0}, std::vector<int>{0, 0}, 3);
  EXPECT_EQ(m.class_precision[2], 0.0);
  EXPECT_EQ(m.class_recall[2], 0.0);
  EXPECT_EQ(m.f1, 1.0);
}

TEST(Metrics, IdentitiesOnRandomLabels) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> label(0, 4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> t(97), p(97);
    for (auto& v : t) v = label(rng);
    for (auto& v : p) v = label(rng);
    const auto m = evaluate(t, p, 5);
    EXPECT_DOUBLE_EQ(m.accuracy, static_cast<double>(m.confusion.trace()) / m.confusion.sum());
    EXPECT_NEAR(m.recall, m.accuracy, 1e-12);
    for (int k = 0; k < 5; ++k) {
      EXPECT_EQ(m.confusion.row(k).sum(), std::count(t.begin(), t.end(), k));
    }
  }
}

TEST(Metrics, LabelOutOfRangeIsFatal) {
  EXPECT_THROW(evaluate(std::vector<int>{0, 3}, std::vector<int>{0, 1}, 3), Error);
  EXPECT_THROW(evaluate(std::vector<int>{0}, std::vector<int>{0, 1}, 3), Error);
}

TEST(Aggregate, StudentT) {
  EXPECT_NEAR(t_critical_95(10), 2.262157, 1e-6);
  EXPECT_NEAR(t_critical_95(2), 12.706205, 1e-6);
}

TEST(Aggregate, NineOnesAndPointNine) {
  std::vector<double> v(9, 1.0);
  v.push_back(0.9);
  const auto mm = mean_margin(v);
  EXPECT_NEAR(mm.mean, 0.99, 1e-12);
  // s = sqrt(10 * 0.0001 * 9 / 9 ... ) computed directly:
  double s2 = 0;
  for (double x : v) s2 += (x - 0.99) * (x - 0.99);
  const double s = std::sqrt(s2 / 9);
  EXPECT_NEAR(s, 0.031623, 1e-6);
  EXPECT_NEAR(mm.margin, 2.262157 * s / std::sqrt(10.0), 1e-6);
  EXPECT_NEAR(mm.margin, 0.0226, 5e-5);
}

TEST(Aggregate, IdenticalRunsHaveZeroMargin) {
  const std::vector<double> v(10, 0.999);
  const auto mm = mean_margin(v);
  EXPECT_EQ(mm.margin, 0.0);
  EXPECT_DOUBLE_EQ(mm.mean, 0.999);
}

TEST(Aggregate, ConfusionIsElementwiseSum) {
  std::vector<Metrics> runs;
  runs.push_back(evaluate(std::vector<int>{0, 1, 1}, std::vector<int>{0, 1, 0}, 2));
  runs.push_back(evaluate(std::vector<int>{0, 0, 1}, std::vector<int>{1, 0, 1}, 2));
  const auto a = aggregate_runs(runs);
  EXPECT_EQ(a.runs, 2u);
  EXPECT_TRUE(a.confusion == runs[0].confusion + runs[1].confusion);
  EXPECT_GE(a.f1.margin, 0.0);
}

TEST(Aggregate, NeedsTwoRuns) {
  std::vector<Metrics> one{evaluate(std::vector<int>{0}, std::vector<int>{0}, 2)};
  EXPECT_THROW(aggregate_runs(one), Error);
  EXPECT_THROW(mean_margin(std::vector<double>{1.0}), Error);
}
