#include "lqe/metrics.hpp"

#include <string>

#include "lqe/error.hpp"

namespace lqe {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (const auto& row : counts) {
    for (auto c : row) n += c;
  }
  return n;
}

std::uint64_t ConfusionMatrix::correct() const {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < kNumGrades; ++i) n += counts[i][i];
  return n;
}

std::uint64_t ConfusionMatrix::support(QualityGrade g) const {
  std::uint64_t n = 0;
  for (auto c : counts[grade_index(g)]) n += c;
  return n;
}

std::uint64_t ConfusionMatrix::predicted(QualityGrade g) const {
  std::uint64_t n = 0;
  for (const auto& row : counts) n += row[grade_index(g)];
  return n;
}

ConfusionMatrix confusion_matrix(std::span<const QualityGrade> truths,
                                 std::span<const QualityGrade> preds) {
  if (truths.size() != preds.size()) {
    throw ValidationError("confusion_matrix: " + std::to_string(truths.size()) + " truths vs " +
                          std::to_string(preds.size()) + " predictions");
  }
  if (truths.empty()) throw ValidationError("confusion_matrix: no samples");
  ConfusionMatrix cm;
  for (std::size_t k = 0; k < truths.size(); ++k) {
    ++cm.counts[grade_index(truths[k])][grade_index(preds[k])];
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw ValidationError("accuracy: confusion matrix is empty");
  return static_cast<double>(cm.correct()) / static_cast<double>(total);
}

std::array<double, kNumGrades> per_class_f1(const ConfusionMatrix& cm) {
  std::array<double, kNumGrades> f1{};
  for (const auto g : kAllGrades) {
    const auto i = grade_index(g);
    const auto tp = static_cast<double>(cm.counts[i][i]);
    const auto pred = cm.predicted(g);
    const auto sup = cm.support(g);
    const double precision = pred == 0 ? 0.0 : tp / static_cast<double>(pred);
    const double recall = sup == 0 ? 0.0 : tp / static_cast<double>(sup);
    f1[i] = precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
  }
  return f1;
}

double macro_f1(const ConfusionMatrix& cm) {
  const auto f1 = per_class_f1(cm);
  double sum = 0.0;
  std::size_t classes = 0;
  for (const auto g : kAllGrades) {
    if (cm.support(g) == 0) continue;
    sum += f1[grade_index(g)];
    ++classes;
  }
  if (classes == 0) throw ValidationError("macro_f1: no grade has ground-truth support");
  return sum / static_cast<double>(classes);
}

std::vector<QualityGrade> persistence_baseline(const std::vector<WindowSample>& windows) {
  std::vector<QualityGrade> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(grade_of(w.last_rsrp_dbm));
  return out;
}

}  // namespace lqe
