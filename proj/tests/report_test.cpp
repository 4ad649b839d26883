#include "lqe/report.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "lqe/error.hpp"

using namespace lqe;

namespace {

Report parse_text(const std::string& text) {
  std::istringstream in(text);
  return Report::parse(in);
}

}  // namespace

TEST(Report, WriteLayout) {
  Report r("train");
  r.set("summary", "best_epoch", std::uint64_t{5}).set("summary", "loss", 0.25);
  auto& h = r.section("history");
  h.columns = {"epoch", "loss"};
  h.rows = {{"1", "0.5"}, {"2", "0.25"}};
  EXPECT_EQ(r.str(),
            "# lqe train report\n"
            "\n"
            "[summary]\n"
            "best_epoch = 5\n"
            "loss = 0.25\n"
            "\n"
            "[history]\n"
            "epoch,loss\n"
            "1,0.5\n"
            "2,0.25\n");
}

TEST(Report, RoundTrip) {
  Report r("eval");
  r.set("metrics", "accuracy", 2.0 / 3.0).set("metrics", "name", std::string("a b = c"));
  auto& t = r.section("table");
  t.columns = {"x", "y"};
  t.rows = {{"1", ""}, {"3", "4"}};
  const auto back = parse_text(r.str());
  EXPECT_EQ(back.kind(), "eval");
  EXPECT_EQ(back.at("metrics").number("accuracy"), 2.0 / 3.0);
  EXPECT_EQ(back.at("metrics").find("name").value(), "a b = c");
  EXPECT_EQ(back.at("table").columns, t.columns);
  EXPECT_EQ(back.at("table").rows, t.rows);
  EXPECT_EQ(back.str(), r.str());
}

TEST(Report, DoublesRoundTripExactly) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<double>(static_cast<int>(rng() % 40) - 20));
    Report r("x");
    r.set("s", "v", v);
    EXPECT_EQ(parse_text(r.str()).at("s").number("v"), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(-2.0), "-2");
}

TEST(Report, SetOverwritesExistingKey) {
  Report r("x");
  r.set("s", "k", 1.0).set("s", "k", 2.0);
  EXPECT_EQ(r.at("s").values.size(), 1u);
  EXPECT_EQ(r.at("s").number("k"), 2.0);
}

TEST(Report, MalformedInputRejected) {
  EXPECT_THROW(parse_text(""), ValidationError);
  EXPECT_THROW(parse_text("not a header\n"), ValidationError);
  EXPECT_THROW(parse_text("# lqe x report\nkey = 1\n"), ValidationError);  // outside section
  EXPECT_THROW(parse_text("# lqe x report\n[s]\n[s]\n"), ValidationError);  // duplicate
  EXPECT_THROW(parse_text("# lqe x report\n[t]\na,b\n1,2,3\n"), ValidationError);
  EXPECT_THROW(parse_text("# lqe x report\n[s\n"), ValidationError);
}

TEST(Report, MissingKeysAndNonNumbers) {
  const auto r = parse_text("# lqe x report\n[s]\na = hello\n");
  EXPECT_THROW(r.at("s").number("a"), ValidationError);
  EXPECT_THROW(r.at("s").number("b"), ValidationError);
  EXPECT_THROW(r.at("t"), ValidationError);
  EXPECT_EQ(r.find_section("t"), nullptr);
}

TEST(Report, EvalSectionsRoundTripConfusion) {
  EvalReport e;
  const std::vector<QualityGrade> t = {QualityGrade::kGood, QualityGrade::kBad,
                                       QualityGrade::kBad};
  const std::vector<QualityGrade> p = {QualityGrade::kGood, QualityGrade::kGood,
                                       QualityGrade::kBad};
  e.confusion = confusion_matrix(t, p);
  e.accuracy = accuracy(e.confusion);
  e.macro_f1 = macro_f1(e.confusion);
  e.per_class_f1 = per_class_f1(e.confusion);
  e.persistence_confusion = confusion_matrix(t, t);
  Report r("eval");
  add_eval_sections(r, e);
  const auto back = parse_text(r.str());
  EXPECT_EQ(confusion_from_section(back.at("confusion")), e.confusion);
  EXPECT_EQ(confusion_from_section(back.at("persistence_confusion")), e.persistence_confusion);
  EXPECT_EQ(back.at("metrics").number("accuracy"), e.accuracy);
  EXPECT_EQ(back.at("metrics").number("macro_f1"), e.macro_f1);
  const auto& rows = back.at("per_class_f1").rows;
  ASSERT_EQ(rows.size(), kNumGrades);
  const auto good = grade_index(QualityGrade::kGood);
  EXPECT_EQ(rows[good][0], "good");
  EXPECT_EQ(rows[good][1], "1");
  EXPECT_EQ(std::stod(rows[good][2]), e.per_class_f1[good]);
}

TEST(Report, HistorySections) {
  TrainHistory h;
  h.train_loss = {1.0, 0.5, 0.75};
  h.validation_loss = {0.9, 0.4, 0.6};
  h.stopped_epoch = 3;
  h.best_epoch = 2;
  Report r("train");
  add_history_sections(r, h);
  const auto back = parse_text(r.str());
  EXPECT_EQ(back.at("summary").number("best_epoch"), 2.0);
  EXPECT_EQ(back.at("summary").number("stopped_epoch"), 3.0);
  EXPECT_EQ(back.at("summary").number("best_validation_loss"), 0.4);
  EXPECT_EQ(back.at("history").rows.size(), 3u);
}

TEST(Report, SaveAndLoad) {
  const auto path = ::testing::TempDir() + "report_test.txt";
  Report r("x");
  r.set("s", "k", 3.5);
  r.save(path);
  EXPECT_EQ(Report::load(path).str(), r.str());
  EXPECT_THROW(Report::load(path + ".missing"), IoError);
}
