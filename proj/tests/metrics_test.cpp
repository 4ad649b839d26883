#include "lqe/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <numeric>
#include <random>

#include "lqe/error.hpp"
#include "oracles.hpp"

using namespace lqe;

namespace {

constexpr auto A = QualityGrade::kGood;
constexpr auto B = QualityGrade::kBad;

std::vector<QualityGrade> random_grades(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<int> g(0, 4);
  std::vector<QualityGrade> out(n);
  for (auto& x : out) x = static_cast<QualityGrade>(g(rng));
  return out;
}

std::vector<WindowSample> windows_from(const std::vector<double>& rsrp) {
  return build_windows(ema_decompose({rsrp}, 1.0), 1);
}

}  // namespace

TEST(ConfusionMatrix, PerfectIsDiagonal) {
  const std::vector<QualityGrade> t = {A, B, A, QualityGrade::kVeryBad};
  const auto cm = confusion_matrix(t, t);
  for (std::size_t i = 0; i < kNumGrades; ++i) {
    for (std::size_t j = 0; j < kNumGrades; ++j) {
      if (i != j) EXPECT_EQ(cm.counts[i][j], 0u);
    }
  }
  EXPECT_EQ(cm.correct(), 4u);
  EXPECT_EQ(accuracy(cm), 1.0);
  EXPECT_EQ(macro_f1(cm), 1.0);
}

TEST(ConfusionMatrix, SingleOffDiagonal) {
  const std::vector<QualityGrade> t = {A};
  const std::vector<QualityGrade> p = {B};
  const auto cm = confusion_matrix(t, p);
  EXPECT_EQ(cm.counts[grade_index(A)][grade_index(B)], 1u);
  EXPECT_EQ(cm.total(), 1u);
  EXPECT_EQ(accuracy(cm), 0.0);
}

TEST(ConfusionMatrix, OrderInvariant) {
  std::mt19937_64 rng(3);
  auto t = random_grades(rng, 50);
  auto p = random_grades(rng, 50);
  const auto cm = confusion_matrix(t, p);
  std::vector<std::size_t> perm(50);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<QualityGrade> t2;
  std::vector<QualityGrade> p2;
  for (auto i : perm) {
    t2.push_back(t[i]);
    p2.push_back(p[i]);
  }
  EXPECT_EQ(confusion_matrix(t2, p2), cm);
}

TEST(ConfusionMatrix, Errors) {
  const std::vector<QualityGrade> one = {A};
  const std::vector<QualityGrade> two = {A, B};
  EXPECT_THROW(confusion_matrix(one, two), ValidationError);
  EXPECT_THROW(confusion_matrix({}, {}), ValidationError);
  EXPECT_THROW(accuracy(ConfusionMatrix{}), ValidationError);
  EXPECT_THROW(macro_f1(ConfusionMatrix{}), ValidationError);
}

TEST(Scores, WorkedExample) {
  const std::vector<QualityGrade> t = {A, A, B};
  const std::vector<QualityGrade> p = {A, B, B};
  const auto cm = confusion_matrix(t, p);
  EXPECT_EQ(accuracy(cm), 2.0 / 3.0);
  const auto f1 = per_class_f1(cm);
  EXPECT_DOUBLE_EQ(f1[grade_index(A)], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(f1[grade_index(B)], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(macro_f1(cm), 2.0 / 3.0);
}

TEST(Scores, UnsupportedClassesExcluded) {
  // Predicting an absent class costs precision of nothing and is not averaged in.
  const std::vector<QualityGrade> t = {A, A};
  const std::vector<QualityGrade> p = {A, QualityGrade::kVeryGood};
  const auto cm = confusion_matrix(t, p);
  EXPECT_DOUBLE_EQ(macro_f1(cm), 2.0 / 3.0);  // F1_A = 2 * 1 * 0.5 / 1.5
  EXPECT_EQ(per_class_f1(cm)[grade_index(QualityGrade::kVeryGood)], 0.0);
}

TEST(Scores, MatchBruteForceExactly) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 200;
    const auto t = random_grades(rng, n);
    const auto p = random_grades(rng, n);
    const auto cm = confusion_matrix(t, p);
    const auto ref = test::brute_force_scores(t, p);
    EXPECT_EQ(accuracy(cm), ref.accuracy);
    EXPECT_EQ(macro_f1(cm), ref.macro_f1);
  }
}

TEST(Scores, BoundsAndRelabelInvariance) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = random_grades(rng, 80);
    auto p = t;
    for (auto& x : p) {
      if (rng() % 3 == 0) x = static_cast<QualityGrade>(rng() % 5);
    }
    const auto cm = confusion_matrix(t, p);
    const double acc = accuracy(cm);
    const double f1 = macro_f1(cm);
    EXPECT_GE(acc, 0.0);
    EXPECT_LE(acc, 1.0);
    EXPECT_GE(f1, 0.0);
    EXPECT_LE(f1, 1.0);
    const bool diagonal = cm.correct() == cm.total();
    EXPECT_EQ(acc == 1.0, diagonal);
    EXPECT_EQ(f1 == 1.0, diagonal);

    // Relabel classes with a fixed permutation.
    std::array<int, 5> perm = {3, 0, 4, 1, 2};
    std::vector<QualityGrade> t2;
    std::vector<QualityGrade> p2;
    for (std::size_t k = 0; k < t.size(); ++k) {
      t2.push_back(static_cast<QualityGrade>(perm[grade_index(t[k])]));
      p2.push_back(static_cast<QualityGrade>(perm[grade_index(p[k])]));
    }
    EXPECT_NEAR(macro_f1(confusion_matrix(t2, p2)), f1, 1e-15);
  }
}

TEST(Scores, RandomGuessingOnBalancedClasses) {
  std::mt19937_64 rng(23);
  const std::size_t n = 100000;
  std::vector<QualityGrade> t(n);
  for (std::size_t k = 0; k < n; ++k) t[k] = static_cast<QualityGrade>(k % 5);
  const auto p = random_grades(rng, n);
  EXPECT_NEAR(accuracy(confusion_matrix(t, p)), 0.2, 0.01);
}

TEST(Persistence, ConstantTraceIsPerfect) {
  const auto w = windows_from(std::vector<double>(20, -100.0));
  const auto pred = persistence_baseline(w);
  std::vector<QualityGrade> truth;
  for (const auto& x : w) truth.push_back(x.label_grade);
  EXPECT_EQ(accuracy(confusion_matrix(truth, pred)), 1.0);
}

TEST(Persistence, AlternatingAcrossEdgeIsAlwaysWrong) {
  std::vector<double> rsrp;
  for (int i = 0; i < 21; ++i) rsrp.push_back(i % 2 == 0 ? -83.0 : -86.0);
  const auto w = windows_from(rsrp);
  const auto pred = persistence_baseline(w);
  std::vector<QualityGrade> truth;
  for (const auto& x : w) truth.push_back(x.label_grade);
  EXPECT_EQ(accuracy(confusion_matrix(truth, pred)), 0.0);
  for (const auto g : pred) EXPECT_LT(grade_index(g), kNumGrades);
}
