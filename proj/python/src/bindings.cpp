#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "lqe/error.hpp"
#include "lqe/grading.hpp"
#include "lqe/metrics.hpp"
#include "lqe/model.hpp"
#include "lqe/pipeline.hpp"
#include "lqe/preprocess.hpp"
#include "lqe/trace_io.hpp"
#include "lqe/training.hpp"

namespace py = pybind11;
using namespace lqe;

namespace {

QualityGrade parse_grade(const std::string& name) {
  const auto g = grade_from_name(name);
  if (!g) throw ValidationError("unknown grade '" + name + "'");
  return *g;
}

std::vector<QualityGrade> parse_grades(const std::vector<std::string>& names) {
  std::vector<QualityGrade> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(parse_grade(n));
  return out;
}

Subset parse_subset(const std::string& s) {
  if (s == "all") return Subset::kAll;
  if (s == "train") return Subset::kTrain;
  if (s == "validation") return Subset::kValidation;
  if (s == "test") return Subset::kTest;
  throw ValidationError("unknown subset '" + s + "' (expected all, train, validation or test)");
}

/// Feature `j` of a trace with missing values as NaN.
std::vector<double> feature_values(const SessionTrace& t, std::size_t j) {
  if (j >= t.feature_count()) throw ValidationError("feature index out of range");
  std::vector<double> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& r = t.records[i];
    out[i] = r.missing[j] ? std::numeric_limits<double>::quiet_NaN() : r.values[j];
  }
  return out;
}

std::vector<std::int64_t> timestamps(const SessionTrace& t) {
  std::vector<std::int64_t> out;
  out.reserve(t.size());
  for (const auto& r : t.records) out.push_back(r.timestamp_s);
  return out;
}

struct PyTrainResult {
  LqeModel model;
  TrainHistory history;
  std::size_t train_windows = 0;
  std::size_t validation_windows = 0;
  std::size_t test_windows = 0;
};

struct PyForecast {
  std::string session_id;
  std::int64_t timestamp_s = 0;
  double trend_dbm = 0.0;
  double noise_dbm = 0.0;
  double rsrp_dbm = 0.0;
  std::string grade;
  double actual_rsrp_dbm = 0.0;
  std::string actual_grade;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Next-second link-quality forecasting core";

  // Library errors map onto the closest built-in Python exception.
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const IoError& e) {
      PyErr_SetString(PyExc_OSError, e.what());
    } catch (const ValidationError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const FormatError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const TrainingError& e) {
      PyErr_SetString(PyExc_ArithmeticError, e.what());
    }
  });

  std::vector<std::string> grades;
  for (const auto g : kAllGrades) grades.emplace_back(grade_name(g));
  m.attr("GRADES") = py::tuple(py::cast(grades));

  m.def("grade_of", [](double rsrp) { return std::string(grade_name(grade_of(rsrp))); },
        py::arg("rsrp_dbm"), "Quality grade of an RSRP value in dBm.");

  py::class_<SessionTrace>(m, "SessionTrace")
      .def_readonly("session_id", &SessionTrace::session_id)
      .def_readonly("feature_names", &SessionTrace::feature_names)
      .def("__len__", &SessionTrace::size)
      .def_property_readonly("timestamps", &timestamps)
      .def("values", &feature_values, py::arg("feature"),
           "Values of one feature, NaN where missing.")
      .def("__repr__", [](const SessionTrace& t) {
        return "<SessionTrace '" + t.session_id + "' with " + std::to_string(t.size()) +
               " records>";
      });

  m.def("read_trace_csv", &read_trace_csv, py::arg("path"));
  m.def("write_trace_csv",
        py::overload_cast<const std::string&, const std::vector<SessionTrace>&>(&write_trace_csv),
        py::arg("path"), py::arg("traces"));
  m.def(
      "generate_synthetic_trace",
      [](std::size_t length, std::uint64_t seed, std::optional<double> rsrp_mean,
         std::optional<double> rsrp_sd, std::optional<double> rsrp_autocorr,
         double rsrp_amplitude, double rsrp_period, const std::string& session_id) {
        auto spec = SyntheticSpec::drive_test_defaults(length, seed);
        if (rsrp_mean) spec.rsrp.mean = *rsrp_mean;
        if (rsrp_sd) spec.rsrp.sd = *rsrp_sd;
        if (rsrp_autocorr) spec.rsrp.autocorrelation = *rsrp_autocorr;
        spec.rsrp.seasonal_amplitude = rsrp_amplitude;
        spec.rsrp.seasonal_period_s = rsrp_period;
        spec.session_id = session_id;
        return generate_synthetic_trace(spec);
      },
      py::arg("length"), py::arg("seed") = 0, py::arg("rsrp_mean") = py::none(),
      py::arg("rsrp_sd") = py::none(), py::arg("rsrp_autocorr") = py::none(),
      py::arg("rsrp_amplitude") = 0.0, py::arg("rsrp_period") = 1.0,
      py::arg("session_id") = "synthetic",
      "AR(1) RSRP/SINR trace with drive-test marginals unless overridden.");

  m.def(
      "decompose",
      [](const std::vector<std::vector<double>>& features, double tau) {
        const auto d = ema_decompose(features, tau);
        return py::make_tuple(d.trend, d.noise);
      },
      py::arg("features"), py::arg("tau"),
      "EMA trend/noise split of each feature series; returns (trend, noise).");

  py::class_<LqeModel>(m, "Model")
      .def_property_readonly("window", [](const LqeModel& x) { return x.config.window; })
      .def_property_readonly("tau", [](const LqeModel& x) { return x.config.tau; })
      .def_property_readonly("hidden", [](const LqeModel& x) { return x.params.hidden_size(); })
      .def_property_readonly("layers", [](const LqeModel& x) { return x.params.layer_count(); })
      .def_property_readonly("feature_count",
                             [](const LqeModel& x) { return x.standardizer.mean.size() / 2; })
      .def_property_readonly("parameter_count",
                             [](const LqeModel& x) { return x.params.parameter_count(); })
      .def("__eq__", [](const LqeModel& a, const LqeModel& b) { return a == b; });

  m.def("load_model", py::overload_cast<const std::string&>(&load_model), py::arg("path"));
  m.def("save_model", py::overload_cast<const std::string&, const LqeModel&>(&save_model),
        py::arg("path"), py::arg("model"));

  py::class_<PyTrainResult>(m, "TrainResult")
      .def_readonly("model", &PyTrainResult::model)
      .def_property_readonly("train_loss",
                             [](const PyTrainResult& r) { return r.history.train_loss; })
      .def_property_readonly("validation_loss",
                             [](const PyTrainResult& r) { return r.history.validation_loss; })
      .def_property_readonly("best_epoch", [](const PyTrainResult& r) { return r.history.best_epoch; })
      .def_property_readonly("stopped_epoch",
                             [](const PyTrainResult& r) { return r.history.stopped_epoch; })
      .def_property_readonly("early_stopped",
                             [](const PyTrainResult& r) { return r.history.early_stopped; })
      .def_readonly("train_windows", &PyTrainResult::train_windows)
      .def_readonly("validation_windows", &PyTrainResult::validation_windows)
      .def_readonly("test_windows", &PyTrainResult::test_windows);

  m.def(
      "train",
      [](const std::vector<SessionTrace>& traces, double tau, std::size_t window,
         std::size_t hidden, std::size_t layers, double lr, std::size_t batch,
         std::size_t epochs, double dropout, std::size_t patience, double delta,
         std::uint64_t seed, std::tuple<unsigned, unsigned, unsigned> split) {
        PreprocessConfig config{tau, window,
                                SplitRatio{std::get<0>(split), std::get<1>(split),
                                           std::get<2>(split)}};
        TrainHyper hyper;
        hyper.learning_rate = lr;
        hyper.batch_size = batch;
        hyper.max_epochs = epochs;
        hyper.dropout_rate = dropout;
        hyper.seed = seed;
        TrainOutcome out;
        {
          py::gil_scoped_release release;
          out = train_model(traces, config, ModelShape{hidden, layers}, hyper,
                            EarlyStopConfig{patience, delta});
        }
        return PyTrainResult{std::move(out.model), std::move(out.history), out.train_windows,
                             out.validation_windows, out.test_windows};
      },
      py::arg("traces"), py::arg("tau") = 120.0, py::arg("window") = 370, py::arg("hidden") = 128,
      py::arg("layers") = 2, py::arg("lr") = 0.001, py::arg("batch") = 128,
      py::arg("epochs") = 1000, py::arg("dropout") = 0.266, py::arg("patience") = 50,
      py::arg("delta") = -0.0001, py::arg("seed") = 0,
      py::arg("split") = std::make_tuple(7u, 2u, 1u),
      "Full pipeline: decompose, window, split, standardize, oversample, train.");

  py::class_<PyForecast>(m, "Forecast")
      .def_readonly("session_id", &PyForecast::session_id)
      .def_readonly("timestamp_s", &PyForecast::timestamp_s)
      .def_readonly("trend_dbm", &PyForecast::trend_dbm)
      .def_readonly("noise_dbm", &PyForecast::noise_dbm)
      .def_readonly("rsrp_dbm", &PyForecast::rsrp_dbm)
      .def_readonly("grade", &PyForecast::grade)
      .def_readonly("actual_rsrp_dbm", &PyForecast::actual_rsrp_dbm)
      .def_readonly("actual_grade", &PyForecast::actual_grade);

  m.def(
      "forecast",
      [](const LqeModel& model, const std::vector<SessionTrace>& traces) {
        const auto data = prepare_windows(traces, model.config);
        const auto f = lqe::forecast(model, data.windows);
        std::vector<PyForecast> out;
        out.reserve(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) {
          const auto& w = data.windows[i];
          out.push_back(PyForecast{data.session_of(w), data.label_timestamp(w), f[i].trend_dbm,
                                   f[i].noise_dbm, f[i].rsrp_dbm,
                                   std::string(grade_name(f[i].grade)), w.target_rsrp_dbm,
                                   std::string(grade_name(w.label_grade))});
        }
        return out;
      },
      py::arg("model"), py::arg("traces"), "One-step-ahead forecast for every window.");

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("accuracy", &EvalReport::accuracy)
      .def_readonly("macro_f1", &EvalReport::macro_f1)
      .def_readonly("mse_dbm", &EvalReport::mse_dbm)
      .def_readonly("mse_standardized", &EvalReport::mse_standardized)
      .def_readonly("persistence_accuracy", &EvalReport::persistence_accuracy)
      .def_readonly("persistence_macro_f1", &EvalReport::persistence_macro_f1)
      .def_readonly("persistence_mse_dbm", &EvalReport::persistence_mse_dbm)
      .def_property_readonly("samples", [](const EvalReport& e) { return e.confusion.total(); })
      .def_property_readonly("confusion", [](const EvalReport& e) {
        std::vector<std::vector<std::size_t>> rows;
        for (const auto& r : e.confusion.counts) rows.emplace_back(r.begin(), r.end());
        return rows;
      });

  m.def(
      "evaluate",
      [](const LqeModel& model, const std::vector<SessionTrace>& traces, const std::string& subset) {
        const auto data = prepare_windows(traces, model.config);
        const auto windows = select_subset(data.windows, model.config.split, parse_subset(subset));
        return evaluate_model(model, windows);
      },
      py::arg("model"), py::arg("traces"), py::arg("subset") = "all");

  m.def(
      "accuracy",
      [](const std::vector<std::string>& truths, const std::vector<std::string>& preds) {
        return accuracy(confusion_matrix(parse_grades(truths), parse_grades(preds)));
      },
      py::arg("truths"), py::arg("predictions"));
  m.def(
      "macro_f1",
      [](const std::vector<std::string>& truths, const std::vector<std::string>& preds) {
        return macro_f1(confusion_matrix(parse_grades(truths), parse_grades(preds)));
      },
      py::arg("truths"), py::arg("predictions"),
      "Mean F1 over grades present in the ground truth.");
}
