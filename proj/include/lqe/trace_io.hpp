#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace lqe {

/// One 1 Hz sample of every feature. `values[j]` must not be read while
/// `missing[j]` is set.
struct MetricRecord {
  std::int64_t timestamp_s = 0;
  std::vector<double> values;
  std::vector<bool> missing;

  bool operator==(const MetricRecord&) const = default;
};

/// One drive-test session. Feature 0 is always RSRP (dBm), the forecast target.
struct SessionTrace {
  std::string session_id;
  std::vector<std::string> feature_names;
  std::vector<MetricRecord> records;

  std::size_t feature_count() const { return feature_names.size(); }
  std::size_t size() const { return records.size(); }

  /// Values of feature `j` in time order. Missing cells are returned as stored.
  std::vector<double> column(std::size_t j) const;

  /// Throws ValidationError if the trace breaks a structural invariant:
  /// empty, ragged records, or timestamps not strictly increasing.
  void validate() const;

  bool operator==(const SessionTrace&) const = default;
};

/// Column names of the trace CSV format. Extra columns are ignored on input.
inline constexpr const char* kSessionColumn = "session_id";
inline constexpr const char* kTimestampColumn = "timestamp_s";
inline constexpr const char* kRsrpColumn = "rsrp_dbm";
inline constexpr const char* kSinrColumn = "sinr_db";

/// Parses `session_id,timestamp_s,rsrp_dbm,sinr_db` CSV (UTF-8, comma
/// separated, no quoting, empty cell = missing).
///
/// Sessions are returned in order of first appearance, each sorted by
/// timestamp. Gaps in the 1-second grid are filled with fully-missing records.
///
/// Throws SchemaError for a missing header column, ParseError for a bad cell,
/// ValidationError for a duplicated (session, timestamp) pair.
std::vector<SessionTrace> parse_trace_csv(std::istream& in);
std::vector<SessionTrace> read_trace_csv(const std::string& path);

/// Writes traces in the format accepted by parse_trace_csv. Doubles use the
/// shortest representation that round-trips exactly.
void write_trace_csv(std::ostream& out, const std::vector<SessionTrace>& traces);
void write_trace_csv(const std::string& path, const std::vector<SessionTrace>& traces);

/// Zero padding: every missing value becomes 0.0 and is unflagged.
SessionTrace impute_missing(SessionTrace trace);

/// Parameters of one synthetic feature channel: a stationary AR(1) Gaussian
/// process with the given marginal mean, SD and lag-1 autocorrelation, plus an
/// optional deterministic sinusoid added on top.
struct FeatureProcess {
  double mean = 0.0;
  double sd = 1.0;
  double autocorrelation = 0.0;
  double seasonal_amplitude = 0.0;
  double seasonal_period_s = 0.0;
};

struct SyntheticSpec {
  std::size_t length = 0;
  FeatureProcess rsrp;
  FeatureProcess sinr;
  std::uint64_t seed = 0;
  std::string session_id = "synthetic";

  /// Marginals of the reference drive-test sample: RSRP -87.17 +/- 14.94 dBm,
  /// SINR 8.62 +/- 9.67 dB.
  static SyntheticSpec drive_test_defaults(std::size_t length, std::uint64_t seed);
};

/// Deterministic in `spec.seed`. Throws ValidationError for length 0,
/// negative SD or autocorrelation outside [0, 1).
SessionTrace generate_synthetic_trace(const SyntheticSpec& spec);

}  // namespace lqe
