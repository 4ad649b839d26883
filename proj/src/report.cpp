#include "lqe/report.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "lqe/error.hpp"

namespace lqe {

namespace {

constexpr const char* kHeaderPrefix = "# lqe ";
constexpr const char* kHeaderSuffix = " report";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void add_confusion(Report& report, const std::string& name, const ConfusionMatrix& cm) {
  auto& s = report.section(name);
  s.columns = {"true\\pred"};
  for (const auto g : kAllGrades) s.columns.emplace_back(grade_name(g));
  for (const auto g : kAllGrades) {
    std::vector<std::string> row{std::string(grade_name(g))};
    for (auto c : cm.counts[grade_index(g)]) row.push_back(std::to_string(c));
    s.rows.push_back(std::move(row));
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::optional<std::string> Report::Section::find(const std::string& key) const {
  for (const auto& [k, v] : values) {
    if (k == key) return v;
  }
  return std::nullopt;
}

double Report::Section::number(const std::string& key) const {
  const auto v = find(key);
  if (!v) throw ValidationError("report section [" + name + "] has no key '" + key + "'");
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw ValidationError("report key '" + key + "' is not a number: '" + *v + "'");
  }
  return out;
}

Report::Section& Report::section(const std::string& name) {
  for (auto& s : sections_) {
    if (s.name == name) return s;
  }
  sections_.push_back(Section{name, {}, {}, {}});
  return sections_.back();
}

const Report::Section* Report::find_section(const std::string& name) const {
  for (const auto& s : sections_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const Report::Section& Report::at(const std::string& name) const {
  const auto* s = find_section(name);
  if (s == nullptr) throw ValidationError("report has no section [" + name + "]");
  return *s;
}

Report& Report::set(const std::string& sec, const std::string& key, const std::string& value) {
  auto& s = section(sec);
  for (auto& [k, v] : s.values) {
    if (k == key) {
      v = value;
      return *this;
    }
  }
  s.values.emplace_back(key, value);
  return *this;
}

Report& Report::set(const std::string& sec, const std::string& key, double value) {
  return set(sec, key, format_double(value));
}

Report& Report::set(const std::string& sec, const std::string& key, std::uint64_t value) {
  return set(sec, key, std::to_string(value));
}

void Report::write(std::ostream& out) const {
  out << kHeaderPrefix << kind_ << kHeaderSuffix << "\n";
  for (const auto& s : sections_) {
    out << "\n[" << s.name << "]\n";
    for (const auto& [k, v] : s.values) out << k << " = " << v << "\n";
    if (!s.columns.empty()) {
      for (std::size_t i = 0; i < s.columns.size(); ++i) out << (i ? "," : "") << s.columns[i];
      out << "\n";
      for (const auto& row : s.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << "\n";
      }
    }
  }
}

std::string Report::str() const {
  std::ostringstream ss;
  write(ss);
  return ss.str();
}

void Report::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write(out);
  if (!out) throw IoError("failed to write '" + path + "'");
}

Report Report::parse(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  Report report;
  bool have_header = false;
  Section* current = nullptr;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (!have_header) {
      const std::string prefix = kHeaderPrefix;
      const std::string suffix = kHeaderSuffix;
      if (!t.starts_with(prefix) || !t.ends_with(suffix) ||
          t.size() < prefix.size() + suffix.size()) {
        throw ValidationError("report line 1: expected '# lqe <kind> report' header");
      }
      report.kind_ = t.substr(prefix.size(), t.size() - prefix.size() - suffix.size());
      have_header = true;
      continue;
    }
    if (t.front() == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        throw ValidationError("report line " + std::to_string(line_no) + ": malformed section header");
      }
      const auto name = t.substr(1, t.size() - 2);
      if (report.find_section(name) != nullptr) {
        throw ValidationError("report line " + std::to_string(line_no) + ": duplicate section [" +
                              name + "]");
      }
      current = &report.section(name);
      continue;
    }
    if (current == nullptr) {
      throw ValidationError("report line " + std::to_string(line_no) + ": data outside a section");
    }
    const auto eq = t.find(" = ");
    if (eq != std::string::npos && current->columns.empty()) {
      current->values.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 3)));
    } else if (current->columns.empty()) {
      current->columns = split_csv(t);
    } else {
      auto row = split_csv(t);
      if (row.size() != current->columns.size()) {
        throw ValidationError("report line " + std::to_string(line_no) + ": expected " +
                              std::to_string(current->columns.size()) + " cells");
      }
      current->rows.push_back(std::move(row));
    }
  }
  if (!have_header) throw ValidationError("report is empty");
  return report;
}

Report Report::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report '" + path + "'");
  return parse(in);
}

void add_eval_sections(Report& report, const EvalReport& eval) {
  const std::string m = "metrics";
  report.set(m, "samples", eval.confusion.total());
  report.set(m, "accuracy", eval.accuracy);
  report.set(m, "macro_f1", eval.macro_f1);
  report.set(m, "mse_standardized", eval.mse_standardized);
  report.set(m, "mse_dbm", eval.mse_dbm);
  report.set(m, "persistence_accuracy", eval.persistence_accuracy);
  report.set(m, "persistence_macro_f1", eval.persistence_macro_f1);
  report.set(m, "persistence_mse_dbm", eval.persistence_mse_dbm);

  auto& f1 = report.section("per_class_f1");
  f1.columns = {"grade", "support", "f1"};
  for (const auto g : kAllGrades) {
    f1.rows.push_back({std::string(grade_name(g)), std::to_string(eval.confusion.support(g)),
                       format_double(eval.per_class_f1[grade_index(g)])});
  }
  add_confusion(report, "confusion", eval.confusion);
  add_confusion(report, "persistence_confusion", eval.persistence_confusion);
}

void add_history_sections(Report& report, const TrainHistory& history) {
  const std::string s = "summary";
  report.set(s, "best_epoch", static_cast<std::uint64_t>(history.best_epoch));
  report.set(s, "stopped_epoch", static_cast<std::uint64_t>(history.stopped_epoch));
  report.set(s, "early_stopped", history.early_stopped ? "true" : "false");
  if (history.best_epoch > 0) {
    report.set(s, "best_validation_loss", history.best_validation_loss());
  }
  auto& h = report.section("history");
  h.columns = {"epoch", "train_loss", "validation_loss"};
  for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
    h.rows.push_back({std::to_string(e + 1), format_double(history.train_loss[e]),
                      format_double(history.validation_loss[e])});
  }
}

ConfusionMatrix confusion_from_section(const Report::Section& section) {
  if (section.columns.size() != kNumGrades + 1 || section.rows.size() != kNumGrades) {
    throw ValidationError("section [" + section.name + "] is not a 5x5 confusion table");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < kNumGrades; ++i) {
    const auto truth = grade_from_name(section.rows[i][0]);
    if (!truth) throw ValidationError("unknown grade '" + section.rows[i][0] + "'");
    for (std::size_t j = 0; j < kNumGrades; ++j) {
      const auto pred = grade_from_name(section.columns[j + 1]);
      if (!pred) throw ValidationError("unknown grade '" + section.columns[j + 1] + "'");
      cm.counts[grade_index(*truth)][grade_index(*pred)] = std::stoull(section.rows[i][j + 1]);
    }
  }
  return cm;
}

}  // namespace lqe
