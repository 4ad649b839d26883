#include "lqe/grading.hpp"

#include <cmath>

#include "lqe/error.hpp"

namespace lqe {

namespace {
constexpr std::array<std::string_view, kNumGrades> kGradeNames = {
    "very_bad", "bad", "intermediate", "good", "very_good"};
}

std::string_view grade_name(QualityGrade g) { return kGradeNames.at(grade_index(g)); }

std::optional<QualityGrade> grade_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumGrades; ++i) {
    if (kGradeNames[i] == name) return static_cast<QualityGrade>(i);
  }
  return std::nullopt;
}

double recombine(double trend_dbm, double noise_dbm) {
  if (!std::isfinite(trend_dbm) || !std::isfinite(noise_dbm)) {
    throw ValidationError("recombine: trend and noise must be finite");
  }
  return trend_dbm + noise_dbm;
}

QualityGrade grade_of(double rsrp_dbm) {
  if (std::isnan(rsrp_dbm)) throw ValidationError("grade_of: RSRP is NaN");
  // The top row is inclusive at its lower edge; every other boundary belongs
  // to the grade below it.
  if (rsrp_dbm >= kRsrpCutPointsDbm[3]) return QualityGrade::kVeryGood;
  if (rsrp_dbm > kRsrpCutPointsDbm[2]) return QualityGrade::kGood;
  if (rsrp_dbm > kRsrpCutPointsDbm[1]) return QualityGrade::kIntermediate;
  if (rsrp_dbm > kRsrpCutPointsDbm[0]) return QualityGrade::kBad;
  return QualityGrade::kVeryBad;
}

}  // namespace lqe
