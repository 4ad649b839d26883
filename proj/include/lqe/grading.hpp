#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace lqe {

/// Link-quality grade, ordered from worst to best.
enum class QualityGrade : int {
  kVeryBad = 0,
  kBad = 1,
  kIntermediate = 2,
  kGood = 3,
  kVeryGood = 4,
};

inline constexpr std::size_t kNumGrades = 5;

inline constexpr std::array<QualityGrade, kNumGrades> kAllGrades = {
    QualityGrade::kVeryBad, QualityGrade::kBad, QualityGrade::kIntermediate,
    QualityGrade::kGood, QualityGrade::kVeryGood};

/// RSRP cut points in dBm between adjacent grades, ascending.
inline constexpr std::array<double, 4> kRsrpCutPointsDbm = {-115.0, -105.0, -95.0, -84.0};

constexpr std::size_t grade_index(QualityGrade g) { return static_cast<std::size_t>(g); }

/// Serialized name: very_bad, bad, intermediate, good, very_good.
std::string_view grade_name(QualityGrade g);
std::optional<QualityGrade> grade_from_name(std::string_view name);

/// Predicted RSRP from predicted trend and noise, both in dBm.
double recombine(double trend_dbm, double noise_dbm);

/// Maps RSRP (dBm) to a grade.
///
///   rsrp >= -84         very_good
///   -95 < rsrp < -84    good
///   -105 < rsrp <= -95  intermediate
///   -115 < rsrp <= -105 bad
///   rsrp <= -115        very_bad
///
/// Throws ValidationError on NaN.
QualityGrade grade_of(double rsrp_dbm);

}  // namespace lqe
