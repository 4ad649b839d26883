#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "lqe/grading.hpp"
#include "lqe/preprocess.hpp"

namespace lqe {

/// counts[true][predicted].
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumGrades>, kNumGrades> counts{};

  std::uint64_t total() const;
  std::uint64_t correct() const;
  std::uint64_t support(QualityGrade g) const;    // row sum
  std::uint64_t predicted(QualityGrade g) const;  // column sum

  bool operator==(const ConfusionMatrix&) const = default;
};

/// Throws ValidationError when lengths differ or are zero.
ConfusionMatrix confusion_matrix(std::span<const QualityGrade> truths,
                                 std::span<const QualityGrade> preds);

/// correct / total. Throws ValidationError on an empty matrix.
double accuracy(const ConfusionMatrix& cm);

/// Per-class F1 = 2PR / (P + R), 0 when P + R = 0.
std::array<double, kNumGrades> per_class_f1(const ConfusionMatrix& cm);

/// Mean per-class F1 over grades with nonzero ground-truth support.
/// Throws ValidationError if no grade has support.
double macro_f1(const ConfusionMatrix& cm);

/// Grade of the raw RSRP at each window's last input step.
std::vector<QualityGrade> persistence_baseline(const std::vector<WindowSample>& windows);

struct EvalReport {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::array<double, kNumGrades> per_class_f1{};
  double mse_standardized = 0.0;
  double mse_dbm = 0.0;

  ConfusionMatrix persistence_confusion;
  double persistence_accuracy = 0.0;
  double persistence_macro_f1 = 0.0;
  double persistence_mse_dbm = 0.0;
};

}  // namespace lqe
