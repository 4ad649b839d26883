#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lqe/metrics.hpp"
#include "lqe/training.hpp"

namespace lqe {

/// Structured text report.
///
///   # lqe <kind> report
///   [section]
///   key = value
///
///   [table_section]
///   col_a,col_b
///   1,2
///
/// A section holds either key/value lines or one CSV table whose first row
/// is the header. Reals use the shortest representation that round-trips.
class Report {
 public:
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> values;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::string> find(const std::string& key) const;
    /// Throws ValidationError when the key is absent or not a number.
    double number(const std::string& key) const;
  };

  explicit Report(std::string kind = {}) : kind_(std::move(kind)) {}

  Section& section(const std::string& name);
  const Section* find_section(const std::string& name) const;
  const Section& at(const std::string& name) const;

  Report& set(const std::string& section, const std::string& key, const std::string& value);
  Report& set(const std::string& section, const std::string& key, double value);
  Report& set(const std::string& section, const std::string& key, std::uint64_t value);

  const std::string& kind() const { return kind_; }
  const std::vector<Section>& sections() const { return sections_; }

  void write(std::ostream& out) const;
  std::string str() const;
  void save(const std::string& path) const;

  /// Throws ValidationError on malformed input.
  static Report parse(std::istream& in);
  static Report load(const std::string& path);

 private:
  std::string kind_;
  std::vector<Section> sections_;
};

std::string format_double(double v);

/// Appends [metrics], [per_class_f1], [confusion] and
/// [persistence_confusion] sections.
void add_eval_sections(Report& report, const EvalReport& eval);

/// Appends [summary] and [history] sections.
void add_history_sections(Report& report, const TrainHistory& history);

/// Rebuilds a confusion matrix from a [confusion]-style table section.
ConfusionMatrix confusion_from_section(const Report::Section& section);

}  // namespace lqe
