#include "lqe/trace_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <string_view>
#include <unordered_map>

#include "lqe/error.hpp"

namespace lqe {

namespace {

constexpr std::size_t kNumCsvFeatures = 2;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

std::int64_t parse_timestamp(std::string_view cell, std::size_t line) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw ParseError(line, "timestamp_s is not an integer: '" + std::string(cell) + "'");
  }
  return v;
}

double parse_value(std::string_view cell, std::string_view column, std::size_t line) {
  double v = 0.0;
  const char* first = cell.data();
  if (!cell.empty() && cell.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    throw ParseError(line, std::string(column) + " is not a finite number: '" +
                               std::string(cell) + "'");
  }
  return v;
}

struct RawRow {
  std::int64_t timestamp;
  std::array<double, kNumCsvFeatures> values;
  std::array<bool, kNumCsvFeatures> missing;
  std::size_t line;
};

void append_double(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

std::vector<double> SessionTrace::column(std::size_t j) const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.values.at(j));
  return out;
}

void SessionTrace::validate() const {
  if (records.empty()) throw ValidationError("session '" + session_id + "' has no records");
  if (feature_names.empty()) throw ValidationError("session '" + session_id + "' has no features");
  const auto n = feature_names.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.values.size() != n || r.missing.size() != n) {
      throw ValidationError("session '" + session_id + "' record " + std::to_string(i) +
                            " does not carry " + std::to_string(n) + " features");
    }
    if (i > 0 && r.timestamp_s <= records[i - 1].timestamp_s) {
      throw ValidationError("session '" + session_id +
                            "' timestamps are not strictly increasing at record " +
                            std::to_string(i));
    }
  }
}

std::vector<SessionTrace> parse_trace_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  // Skip leading blank lines; the first non-empty line is the header.
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw SchemaError("trace CSV is empty: missing header row");

  auto header = split_fields(line);
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].remove_prefix(3);

  const std::array<std::string_view, 4> required = {kSessionColumn, kTimestampColumn,
                                                    kRsrpColumn, kSinrColumn};
  std::array<std::size_t, 4> col{};
  for (std::size_t k = 0; k < required.size(); ++k) {
    const auto it = std::find(header.begin(), header.end(), required[k]);
    if (it == header.end()) {
      throw SchemaError("trace CSV header is missing column '" + std::string(required[k]) + "'");
    }
    col[k] = static_cast<std::size_t>(it - header.begin());
  }
  const std::size_t min_fields = *std::max_element(col.begin(), col.end()) + 1;

  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<RawRow>> rows;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() < min_fields) {
      throw ParseError(line_no, "expected at least " + std::to_string(min_fields) +
                                    " fields, got " + std::to_string(fields.size()));
    }
    const std::string session(fields[col[0]]);
    if (session.empty()) throw ParseError(line_no, "session_id is empty");

    RawRow row{};
    row.line = line_no;
    row.timestamp = parse_timestamp(fields[col[1]], line_no);
    for (std::size_t j = 0; j < kNumCsvFeatures; ++j) {
      const auto cell = fields[col[2 + j]];
      row.missing[j] = cell.empty();
      row.values[j] = cell.empty() ? 0.0 : parse_value(cell, required[2 + j], line_no);
    }

    auto [it, inserted] = rows.try_emplace(session);
    if (inserted) order.push_back(session);
    it->second.push_back(row);
  }

  std::vector<SessionTrace> traces;
  traces.reserve(order.size());
  for (const auto& id : order) {
    auto& raw = rows[id];
    std::stable_sort(raw.begin(), raw.end(),
                     [](const RawRow& a, const RawRow& b) { return a.timestamp < b.timestamp; });

    SessionTrace trace;
    trace.session_id = id;
    trace.feature_names = {kRsrpColumn, kSinrColumn};
    trace.records.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (i > 0 && raw[i].timestamp == raw[i - 1].timestamp) {
        throw ValidationError("duplicate timestamp " + std::to_string(raw[i].timestamp) +
                              " in session '" + id + "' (lines " +
                              std::to_string(raw[i - 1].line) + " and " +
                              std::to_string(raw[i].line) + ")");
      }
      if (i > 0) {
        for (auto t = raw[i - 1].timestamp + 1; t < raw[i].timestamp; ++t) {
          trace.records.push_back(MetricRecord{t, {0.0, 0.0}, {true, true}});
        }
      }
      trace.records.push_back(MetricRecord{raw[i].timestamp,
                                           {raw[i].values[0], raw[i].values[1]},
                                           {raw[i].missing[0], raw[i].missing[1]}});
    }
    traces.push_back(std::move(trace));
  }
  return traces;
}

std::vector<SessionTrace> read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace file '" + path + "'");
  return parse_trace_csv(in);
}

void write_trace_csv(std::ostream& out, const std::vector<SessionTrace>& traces) {
  std::string buf;
  buf.append(kSessionColumn).append(",").append(kTimestampColumn).append(",");
  buf.append(kRsrpColumn).append(",").append(kSinrColumn).append("\n");
  for (const auto& trace : traces) {
    if (trace.feature_count() != kNumCsvFeatures) {
      throw ValidationError("trace CSV carries exactly RSRP and SINR; session '" +
                            trace.session_id + "' has " +
                            std::to_string(trace.feature_count()) + " features");
    }
    for (const auto& r : trace.records) {
      buf.append(trace.session_id).append(",").append(std::to_string(r.timestamp_s));
      for (std::size_t j = 0; j < kNumCsvFeatures; ++j) {
        buf.append(",");
        if (!r.missing[j]) append_double(buf, r.values[j]);
      }
      buf.append("\n");
    }
    out << buf;
    buf.clear();
  }
  out << buf;
  if (!out) throw IoError("failed to write trace CSV");
}

void write_trace_csv(const std::string& path, const std::vector<SessionTrace>& traces) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_trace_csv(out, traces);
}

SessionTrace impute_missing(SessionTrace trace) {
  for (auto& r : trace.records) {
    for (std::size_t j = 0; j < r.values.size(); ++j) {
      if (r.missing[j]) {
        r.values[j] = 0.0;
        r.missing[j] = false;
      }
    }
  }
  return trace;
}

SyntheticSpec SyntheticSpec::drive_test_defaults(std::size_t length, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.length = length;
  spec.seed = seed;
  spec.rsrp = FeatureProcess{-87.17, 14.94, 0.95, 0.0, 0.0};
  spec.sinr = FeatureProcess{8.62, 9.67, 0.8, 0.0, 0.0};
  return spec;
}

SessionTrace generate_synthetic_trace(const SyntheticSpec& spec) {
  if (spec.length == 0) throw ValidationError("synthetic trace length must be >= 1");
  for (const auto* f : {&spec.rsrp, &spec.sinr}) {
    if (!(f->sd >= 0.0)) throw ValidationError("synthetic SD must be >= 0");
    if (!(f->autocorrelation >= 0.0 && f->autocorrelation < 1.0)) {
      throw ValidationError("synthetic autocorrelation must lie in [0, 1)");
    }
    if (f->seasonal_amplitude != 0.0 && !(f->seasonal_period_s > 0.0)) {
      throw ValidationError("synthetic seasonal period must be > 0 when amplitude is set");
    }
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SessionTrace trace;
  trace.session_id = spec.session_id;
  trace.feature_names = {kRsrpColumn, kSinrColumn};
  trace.records.reserve(spec.length);

  const std::array<const FeatureProcess*, 2> procs = {&spec.rsrp, &spec.sinr};
  std::array<double, 2> dev{};  // AR(1) deviation from the mean
  for (std::size_t t = 0; t < spec.length; ++t) {
    MetricRecord r{static_cast<std::int64_t>(t), std::vector<double>(2), {false, false}};
    for (std::size_t j = 0; j < 2; ++j) {
      const auto& p = *procs[j];
      const double z = normal(rng);
      // Stationary start, then innovations scaled so the marginal SD stays p.sd.
      dev[j] = t == 0 ? p.sd * z
                      : p.autocorrelation * dev[j] +
                            p.sd * std::sqrt(1.0 - p.autocorrelation * p.autocorrelation) * z;
      double v = p.mean + dev[j];
      if (p.seasonal_amplitude != 0.0) {
        v += p.seasonal_amplitude *
             std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / p.seasonal_period_s);
      }
      r.values[j] = v;
    }
    trace.records.push_back(std::move(r));
  }
  return trace;
}

}  // namespace lqe
