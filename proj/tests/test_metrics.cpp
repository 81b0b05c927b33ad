#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "pcmeta/metrics.hpp"
#include "support/metrics_oracle.hpp"

namespace pcmeta {
namespace {

TEST(ConfusionMatrix, AccumulateDiagonal) {
  const std::vector<int> labels{0, 0, 1};
  const auto cm = accumulate(ConfusionMatrix(2), labels, labels);
  EXPECT_EQ(cm.at(0, 0), 2u);
  EXPECT_EQ(cm.at(1, 1), 1u);
  EXPECT_EQ(cm.total(), 3u);
}

TEST(ConfusionMatrix, EmptyArraysLeaveMatrixUnchanged) {
  const auto cm = accumulate(ConfusionMatrix(3), std::vector<int>{1}, std::vector<int>{2});
  EXPECT_EQ(accumulate(cm, {}, {}), cm);
}

TEST(ConfusionMatrix, AccumulateIsAdditiveOverConcatenation) {
  const std::vector<int> pa{0, 1, 2, 2}, ta{0, 2, 2, 1};
  const std::vector<int> pb{1, 1, 0}, tb{1, 0, 0};
  std::vector<int> p = pa, t = ta;
  p.insert(p.end(), pb.begin(), pb.end());
  t.insert(t.end(), tb.begin(), tb.end());
  EXPECT_EQ(accumulate(ConfusionMatrix(3), p, t), accumulate(accumulate(ConfusionMatrix(3), pa, ta), pb, tb));
  EXPECT_EQ(accumulate(ConfusionMatrix(3), p, t),
            accumulate(ConfusionMatrix(3), pa, ta) + accumulate(ConfusionMatrix(3), pb, tb));
}

TEST(ConfusionMatrix, InputIsNotModified) {
  const ConfusionMatrix empty(2);
  const auto before = empty;
  (void)accumulate(empty, std::vector<int>{0}, std::vector<int>{1});
  EXPECT_EQ(empty, before);
}

TEST(ConfusionMatrix, RejectsOutOfRangeAndLengthMismatch) {
  EXPECT_THROW(accumulate(ConfusionMatrix(2), std::vector<int>{2}, std::vector<int>{0}), ValidationError);
  EXPECT_THROW(accumulate(ConfusionMatrix(2), std::vector<int>{0}, std::vector<int>{-1}), ValidationError);
  EXPECT_THROW(accumulate(ConfusionMatrix(2), std::vector<int>{0, 1}, std::vector<int>{0}), DimensionError);
}

TEST(Metrics, PerfectPrediction) {
  const std::vector<int> labels{0, 1, 1, 0, 1};
  const auto m = compute_metrics(accumulate(ConfusionMatrix(2), labels, labels));
  EXPECT_EQ(m.oacc, 1.0);
  EXPECT_EQ(m.macc, 1.0);
  EXPECT_EQ(m.miou, 1.0);
}

TEST(Metrics, HandComputedConfusionMatrix) {
  // truth 0: 10 points, 8 correct, 2 -> class 1; truth 1: 5 points, 4 correct, 1 -> class 0.
  std::vector<int> truth, pred;
  auto add = [&](int t, int p, int count) {
    for (int i = 0; i < count; ++i) {
      truth.push_back(t);
      pred.push_back(p);
    }
  };
  add(0, 0, 8);
  add(0, 1, 2);
  add(1, 1, 4);
  add(1, 0, 1);
  const auto cm = accumulate(ConfusionMatrix(2), pred, truth);
  EXPECT_EQ(cm.n(0), 10u);
  EXPECT_EQ(cm.w(0), 1u);
  EXPECT_EQ(cm.w(1), 2u);
  const auto m = compute_metrics(cm);
  EXPECT_DOUBLE_EQ(m.oacc, 0.8);
  EXPECT_DOUBLE_EQ(m.macc, 0.8);
  EXPECT_NEAR(m.miou, (8.0 / 11.0 + 4.0 / 7.0) / 2.0, 1e-15);
  EXPECT_NEAR(m.miou, 0.6494, 1e-4);
}

TEST(Metrics, AbsentClassIsExcludedAndListed) {
  const auto cm = accumulate(ConfusionMatrix(3), std::vector<int>{0, 2, 2}, std::vector<int>{0, 2, 0});
  const auto m = compute_metrics(cm);
  ASSERT_EQ(m.excluded, std::vector<std::size_t>{1});
  EXPECT_DOUBLE_EQ(m.macc, (0.5 + 1.0) / 2.0);
  EXPECT_DOUBLE_EQ(m.miou, (1.0 / 2.0 + 1.0 / 2.0) / 2.0);
}

TEST(Metrics, PredictedButNeverTrueClassContributesZero) {
  const auto cm = accumulate(ConfusionMatrix(2), std::vector<int>{1, 0}, std::vector<int>{0, 0});
  const auto m = compute_metrics(cm);
  EXPECT_TRUE(m.excluded.empty());
  EXPECT_DOUBLE_EQ(m.class_accuracy[1], 0.0);
  EXPECT_DOUBLE_EQ(m.macc, 0.25);
}

TEST(Metrics, EmptyMatrixIsAnError) {
  EXPECT_THROW(compute_metrics(ConfusionMatrix(4)), EmptyInputError);
}

TEST(Metrics, AgreesWithBruteForceAndInvariantsHold) {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = std::uniform_int_distribution<int>(2, 13)(rng);
    const auto points = std::uniform_int_distribution<std::size_t>(1, 500)(rng);
    std::uniform_int_distribution<int> label(0, m - 1);
    std::vector<int> truth(points), pred(points);
    for (std::size_t p = 0; p < points; ++p) {
      truth[p] = label(rng);
      pred[p] = std::bernoulli_distribution(0.6)(rng) ? truth[p] : label(rng);
    }
    const auto metrics = compute_metrics(accumulate(ConfusionMatrix(static_cast<std::size_t>(m)), pred, truth));
    const auto oracle = testing::brute_force_metrics(pred, truth, m);
    EXPECT_EQ(metrics.oacc, static_cast<double>(oracle.correct) / static_cast<double>(oracle.total));
    EXPECT_NEAR(metrics.macc, oracle.macc, 1e-12);
    EXPECT_NEAR(metrics.miou, oracle.miou, 1e-12);
    EXPECT_LE(metrics.miou, metrics.macc);
    EXPECT_GE(metrics.miou, 0.0);
    EXPECT_LE(metrics.macc, 1.0);
    EXPECT_LE(metrics.oacc, 1.0);
  }
}

TEST(Metrics, InvariantUnderClassRelabeling) {
  std::mt19937_64 rng(99);
  const int m = 6;
  std::uniform_int_distribution<int> label(0, m - 1);
  std::vector<int> truth(300), pred(300);
  for (std::size_t p = 0; p < 300; ++p) {
    truth[p] = label(rng);
    pred[p] = std::bernoulli_distribution(0.5)(rng) ? truth[p] : label(rng);
  }
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> truth2(300), pred2(300);
  for (std::size_t p = 0; p < 300; ++p) {
    truth2[p] = perm[static_cast<std::size_t>(truth[p])];
    pred2[p] = perm[static_cast<std::size_t>(pred[p])];
  }
  const auto a = compute_metrics(accumulate(ConfusionMatrix(m), pred, truth));
  const auto b = compute_metrics(accumulate(ConfusionMatrix(m), pred2, truth2));
  EXPECT_EQ(a.oacc, b.oacc);
  EXPECT_NEAR(a.macc, b.macc, 1e-15);
  EXPECT_NEAR(a.miou, b.miou, 1e-15);
}

TEST(Metrics, CsvReport) {
  const auto cm = accumulate(ConfusionMatrix(3), std::vector<int>{0, 2, 2}, std::vector<int>{0, 2, 0});
  std::ostringstream out;
  const std::vector<std::string> names{"floor", "wall", "chair"};
  write_metrics_csv(out, cm, compute_metrics(cm), names);
  EXPECT_EQ(out.str(),
            "class,n_i,c_i,w_i,acc,iou,oAcc,mAcc,mIoU\n"
            "floor,2,1,0,0.500000,0.500000,,,\n"
            "wall,0,0,0,excluded,excluded,,,\n"
            "chair,1,1,1,1.000000,0.500000,,,\n"
            "summary,3,2,1,,,0.666667,0.750000,0.500000\n");
}

}  // namespace
}  // namespace pcmeta
