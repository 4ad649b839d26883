#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "lqe/error.hpp"
#include "lqe/trace_io.hpp"

namespace lqe::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModelFile = "model.lqem";
constexpr const char* kTrainReportFile = "train_report.txt";
constexpr const char* kEvalReportFile = "eval_report.txt";
constexpr const char* kEffectiveConfigFile = "effective_config.txt";
constexpr const char* kHistoryFile = "history.csv";
constexpr const char* kPredictionsFile = "predictions.csv";

/// Flags shared by the training-style commands. Unset flags leave the
/// preset / config-file value in place.
struct Overrides {
  std::optional<std::string> preset;
  std::optional<std::string> config_file;
  std::optional<double> tau;
  std::optional<std::size_t> window;
  std::optional<std::size_t> hidden;
  std::optional<std::size_t> layers;
  std::optional<double> lr;
  std::optional<std::size_t> batch;
  std::optional<std::size_t> epochs;
  std::optional<double> dropout;
  std::optional<std::size_t> patience;
  std::optional<double> delta;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> split;
};

std::string timestamped_dir(const std::string& command) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
  return (fs::path("runs") / (command + "-" + buf)).string();
}

fs::path prepare_out_dir(const std::optional<std::string>& out, const std::string& command) {
  const fs::path dir = out ? fs::path(*out) : fs::path(timestamped_dir(command));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'");
  }
  return dir;
}

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("LQE_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const auto seed = std::stoull(v, &used);
    if (used != std::string(v).size()) throw std::invalid_argument(v);
    return seed;
  } catch (const std::exception&) {
    throw ValidationError(std::string("LQE_SEED is not an unsigned integer: '") + v + "'");
  }
}

RunConfig resolve_config(const Overrides& o, const std::vector<std::string>& inputs) {
  std::optional<Report> record;
  if (o.config_file) record = Report::load(*o.config_file);

  std::string preset = "paper";
  if (record) {
    if (const auto p = record->at("config").find("preset")) preset = *p;
  }
  if (o.preset) preset = *o.preset;

  RunConfig c = RunConfig::for_preset(preset);
  if (const auto seed = env_seed()) c.hyper.seed = *seed;
  if (record) c.merge(record->at("config"));
  c.preset = preset;

  if (o.tau) c.preprocess.tau = *o.tau;
  if (o.window) c.preprocess.window = *o.window;
  if (o.split) c.preprocess.split = parse_split(*o.split);
  if (o.hidden) c.shape.hidden = *o.hidden;
  if (o.layers) c.shape.layers = *o.layers;
  if (o.lr) c.hyper.learning_rate = *o.lr;
  if (o.batch) c.hyper.batch_size = *o.batch;
  if (o.epochs) c.hyper.max_epochs = *o.epochs;
  if (o.dropout) c.hyper.dropout_rate = *o.dropout;
  if (o.patience) c.early_stop.patience = *o.patience;
  if (o.delta) c.early_stop.min_delta = *o.delta;
  if (o.seed) c.hyper.seed = *o.seed;
  if (!inputs.empty()) c.inputs = inputs;
  c.validate();
  return c;
}

std::vector<SessionTrace> read_all(const std::vector<std::string>& paths) {
  std::vector<SessionTrace> traces;
  for (const auto& p : paths) {
    auto t = read_trace_csv(p);
    traces.insert(traces.end(), std::make_move_iterator(t.begin()),
                  std::make_move_iterator(t.end()));
  }
  return traces;
}

Subset parse_subset(const std::string& s) {
  if (s == "all") return Subset::kAll;
  if (s == "train") return Subset::kTrain;
  if (s == "validation") return Subset::kValidation;
  if (s == "test") return Subset::kTest;
  throw ValidationError("unknown subset '" + s + "'");
}

void add_training_flags(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--preset", o.preset, "Default set: paper or desk")
      ->check(CLI::IsMember({"paper", "desk"}));
  cmd.add_option("--config", o.config_file, "Effective-config record to start from");
  cmd.add_option("--tau", o.tau, "EMA span coefficient (>= 1)");
  cmd.add_option("--window", o.window, "Window length N in steps");
  cmd.add_option("--hidden", o.hidden, "Hidden units per LSTM layer");
  cmd.add_option("--layers", o.layers, "Number of LSTM layers");
  cmd.add_option("--lr", o.lr, "Adam learning rate");
  cmd.add_option("--batch", o.batch, "Mini-batch size");
  cmd.add_option("--epochs", o.epochs, "Maximum number of epochs");
  cmd.add_option("--dropout", o.dropout, "Dropout rate in [0, 1)");
  cmd.add_option("--patience", o.patience, "Early-stopping patience in epochs");
  cmd.add_option("--delta", o.delta, "Early-stopping minimum improvement");
  cmd.add_option("--seed", o.seed, "Random seed (falls back to LQE_SEED)");
  cmd.add_option("--split", o.split, "Train:validation:test ratio, e.g. 7:2:1");
}

int cmd_synth(std::size_t length, const SyntheticSpec& base, const std::optional<std::uint64_t>& seed,
              const std::string& out) {
  SyntheticSpec spec = base;
  spec.length = length;
  if (seed) {
    spec.seed = *seed;
  } else if (const auto s = env_seed()) {
    spec.seed = *s;
  }
  const auto trace = generate_synthetic_trace(spec);
  if (out == "-") {
    write_trace_csv(std::cout, {trace});
  } else {
    write_trace_csv(out, {trace});
    std::cerr << "wrote " << trace.size() << " records to " << out << "\n";
  }
  return 0;
}

int cmd_train(const RunConfig& config, const std::optional<std::string>& out) {
  if (config.inputs.empty()) throw ValidationError("train: no input trace given");
  const auto traces = read_all(config.inputs);
  const auto dir = prepare_out_dir(out, "train");

  const auto outcome = train_model(
      traces, config.preprocess, config.shape, config.hyper, config.early_stop,
      [&](std::size_t epoch, const EpochLosses& l) {
        std::cerr << "epoch " << epoch << "/" << config.hyper.max_epochs
                  << " train_loss=" << format_double(l.train)
                  << " validation_loss=" << format_double(l.validation) << "\n";
      });

  save_model((dir / kModelFile).string(), outcome.model);

  Report effective("effective-config");
  config.to_report(effective);
  effective.save((dir / kEffectiveConfigFile).string());

  Report report("train");
  config.to_report(report);
  report.set("data", "train_windows", static_cast<std::uint64_t>(outcome.train_windows));
  report.set("data", "validation_windows", static_cast<std::uint64_t>(outcome.validation_windows));
  report.set("data", "test_windows", static_cast<std::uint64_t>(outcome.test_windows));
  for (const auto g : kAllGrades) {
    report.set("data", "train_count_" + std::string(grade_name(g)),
               static_cast<std::uint64_t>(outcome.train_histogram[grade_index(g)]));
    report.set("data", "oversampled_count_" + std::string(grade_name(g)),
               static_cast<std::uint64_t>(outcome.oversampled_histogram[grade_index(g)]));
  }
  add_history_sections(report, outcome.history);
  report.save((dir / kTrainReportFile).string());

  {
    std::ofstream h(dir / kHistoryFile, std::ios::binary);
    if (!h) throw IoError("cannot write " + (dir / kHistoryFile).string());
    h << "epoch,train_loss,validation_loss\n";
    for (std::size_t e = 0; e < outcome.history.train_loss.size(); ++e) {
      h << e + 1 << "," << format_double(outcome.history.train_loss[e]) << ","
        << format_double(outcome.history.validation_loss[e]) << "\n";
    }
  }

  std::cout << "model: " << (dir / kModelFile).string() << "\n"
            << "best_epoch: " << outcome.history.best_epoch << "\n"
            << "stopped_epoch: " << outcome.history.stopped_epoch << "\n"
            << "best_validation_loss: " << format_double(outcome.history.best_validation_loss())
            << "\n";
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::vector<std::string>& inputs,
                 const std::string& subset, const std::optional<std::string>& out) {
  const auto model = load_model(model_path);
  const auto data = prepare_windows(read_all(inputs), model.config);
  const auto windows = select_subset(data.windows, model.config.split, parse_subset(subset));
  const auto eval = evaluate_model(model, windows);
  const auto dir = prepare_out_dir(out, "evaluate");

  Report report("evaluate");
  report.set("run", "model", model_path);
  std::string joined;
  for (const auto& p : inputs) joined += (joined.empty() ? "" : ";") + p;
  report.set("run", "inputs", joined);
  report.set("run", "subset", subset);
  add_eval_sections(report, eval);
  report.save((dir / kEvalReportFile).string());

  std::cout << "samples: " << eval.confusion.total() << "\n"
            << "accuracy: " << format_double(eval.accuracy) << "\n"
            << "macro_f1: " << format_double(eval.macro_f1) << "\n"
            << "mse_dbm: " << format_double(eval.mse_dbm) << "\n"
            << "persistence_accuracy: " << format_double(eval.persistence_accuracy) << "\n"
            << "report: " << (dir / kEvalReportFile).string() << "\n";
  return 0;
}

int cmd_predict(const std::string& model_path, const std::vector<std::string>& inputs,
                int horizon, const std::optional<std::string>& out) {
  if (horizon != 1) throw ValidationError("only --horizon 1 (one step ahead) is supported");
  const auto model = load_model(model_path);
  const auto data = prepare_windows(read_all(inputs), model.config);
  const auto forecasts = forecast(model, data.windows);
  const auto dir = prepare_out_dir(out, "predict");

  std::ofstream csv(dir / kPredictionsFile, std::ios::binary);
  if (!csv) throw IoError("cannot write " + (dir / kPredictionsFile).string());
  csv << "session_id,timestamp_s,predicted_rsrp_dbm,predicted_grade,actual_rsrp_dbm,actual_grade\n";
  for (std::size_t i = 0; i < forecasts.size(); ++i) {
    const auto& w = data.windows[i];
    const auto& f = forecasts[i];
    csv << data.session_of(w) << "," << data.label_timestamp(w) << ","
        << format_double(f.rsrp_dbm) << "," << grade_name(f.grade) << ","
        << format_double(w.target_rsrp_dbm) << "," << grade_name(w.label_grade) << "\n";
  }
  if (!csv) throw IoError("failed to write predictions");
  std::cout << "predictions: " << forecasts.size() << "\n"
            << "file: " << (dir / kPredictionsFile).string() << "\n";
  return 0;
}

}  // namespace

RunConfig RunConfig::paper() { return RunConfig{}; }

RunConfig RunConfig::desk() {
  RunConfig c;
  c.preset = "desk";
  c.preprocess.window = 30;
  c.shape.hidden = 16;
  c.hyper.batch_size = 8;
  c.hyper.max_epochs = 50;
  return c;
}

RunConfig RunConfig::for_preset(const std::string& name) {
  if (name == "paper") return paper();
  if (name == "desk") return desk();
  throw ValidationError("unknown preset '" + name + "' (expected paper or desk)");
}

void RunConfig::validate() const {
  preprocess.validate();
  hyper.validate();
  if (shape.hidden == 0 || shape.layers == 0) {
    throw ValidationError("hidden size and layer count must be >= 1");
  }
  if (early_stop.patience == 0) throw ValidationError("patience must be >= 1");
}

void RunConfig::to_report(Report& report) const {
  const std::string s = "config";
  report.set(s, "preset", preset);
  std::string joined;
  for (const auto& p : inputs) joined += (joined.empty() ? "" : ";") + p;
  report.set(s, "inputs", joined);
  report.set(s, "tau", preprocess.tau);
  report.set(s, "window", static_cast<std::uint64_t>(preprocess.window));
  report.set(s, "split", format_split(preprocess.split));
  report.set(s, "hidden", static_cast<std::uint64_t>(shape.hidden));
  report.set(s, "layers", static_cast<std::uint64_t>(shape.layers));
  report.set(s, "lr", hyper.learning_rate);
  report.set(s, "batch", static_cast<std::uint64_t>(hyper.batch_size));
  report.set(s, "epochs", static_cast<std::uint64_t>(hyper.max_epochs));
  report.set(s, "dropout", hyper.dropout_rate);
  report.set(s, "adam_beta1", hyper.adam_beta1);
  report.set(s, "adam_beta2", hyper.adam_beta2);
  report.set(s, "adam_epsilon", hyper.adam_epsilon);
  report.set(s, "clip_norm", hyper.clip_norm);
  report.set(s, "patience", static_cast<std::uint64_t>(early_stop.patience));
  report.set(s, "delta", early_stop.min_delta);
  report.set(s, "seed", hyper.seed);
}

void RunConfig::merge(const Report::Section& s) {
  const auto count = [&](const char* key, std::size_t& dst) {
    if (s.find(key)) dst = static_cast<std::size_t>(s.number(key));
  };
  const auto real = [&](const char* key, double& dst) {
    if (s.find(key)) dst = s.number(key);
  };
  if (const auto v = s.find("inputs")) {
    inputs.clear();
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ';')) {
      if (!item.empty()) inputs.push_back(item);
    }
  }
  real("tau", preprocess.tau);
  count("window", preprocess.window);
  if (const auto v = s.find("split")) preprocess.split = parse_split(*v);
  count("hidden", shape.hidden);
  count("layers", shape.layers);
  real("lr", hyper.learning_rate);
  count("batch", hyper.batch_size);
  count("epochs", hyper.max_epochs);
  real("dropout", hyper.dropout_rate);
  real("adam_beta1", hyper.adam_beta1);
  real("adam_beta2", hyper.adam_beta2);
  real("adam_epsilon", hyper.adam_epsilon);
  real("clip_norm", hyper.clip_norm);
  count("patience", early_stop.patience);
  real("delta", early_stop.min_delta);
  if (const auto v = s.find("seed")) hyper.seed = std::stoull(*v);
}

SplitRatio parse_split(const std::string& text) {
  unsigned parts[3] = {0, 0, 0};
  char c1 = 0;
  char c2 = 0;
  std::istringstream ss(text);
  if (!(ss >> parts[0] >> c1 >> parts[1] >> c2 >> parts[2]) || c1 != ':' || c2 != ':' ||
      !ss.eof() || parts[0] == 0 || parts[1] == 0) {
    throw ValidationError("split must look like 7:2:1 with nonzero train and validation parts, got '" +
                          text + "'");
  }
  return SplitRatio{parts[0], parts[1], parts[2]};
}

std::string format_split(const SplitRatio& r) {
  return std::to_string(r.train) + ":" + std::to_string(r.validation) + ":" +
         std::to_string(r.test);
}

int run(int argc, char** argv) {
  CLI::App app{"Next-second link-quality forecasting from RSRP/SINR traces"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic AR(1) trace in the trace CSV format");
  std::size_t synth_length = 0;
  std::optional<std::uint64_t> synth_seed;
  std::string synth_out = "-";
  SyntheticSpec synth_spec = SyntheticSpec::drive_test_defaults(1, 0);
  synth->add_option("--length", synth_length, "Number of 1 Hz records")
      ->required()
      ->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "Random seed (falls back to LQE_SEED)");
  synth->add_option("--out", synth_out, "Output CSV path, '-' for stdout");
  synth->add_option("--session", synth_spec.session_id, "Session id written to every row");
  synth->add_option("--rsrp-mean", synth_spec.rsrp.mean, "RSRP mean (dBm)");
  synth->add_option("--rsrp-sd", synth_spec.rsrp.sd, "RSRP SD (dBm)");
  synth->add_option("--rsrp-autocorr", synth_spec.rsrp.autocorrelation, "RSRP lag-1 autocorrelation");
  synth->add_option("--rsrp-amplitude", synth_spec.rsrp.seasonal_amplitude,
                    "Amplitude of a sinusoid added to RSRP (dBm)");
  synth->add_option("--rsrp-period", synth_spec.rsrp.seasonal_period_s, "Sinusoid period (s)");
  synth->add_option("--sinr-mean", synth_spec.sinr.mean, "SINR mean (dB)");
  synth->add_option("--sinr-sd", synth_spec.sinr.sd, "SINR SD (dB)");
  synth->add_option("--sinr-autocorr", synth_spec.sinr.autocorrelation, "SINR lag-1 autocorrelation");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a forecaster on one or more trace files");
  Overrides overrides;
  std::vector<std::string> train_inputs;
  std::optional<std::string> train_out;
  train_cmd->add_option("traces", train_inputs, "Trace CSV files");
  add_training_flags(*train_cmd, overrides);
  train_cmd->add_option("--out", train_out, "Output directory (default runs/train-<timestamp>)");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a model on a trace");
  std::string eval_model;
  std::vector<std::string> eval_inputs;
  std::string eval_subset = "all";
  std::optional<std::string> eval_out;
  eval_cmd->add_option("--model", eval_model, "Model file")->required();
  eval_cmd->add_option("traces", eval_inputs, "Trace CSV files")->required();
  eval_cmd->add_option("--subset", eval_subset, "Windows to score: all, train, validation, test")
      ->check(CLI::IsMember({"all", "train", "validation", "test"}));
  eval_cmd->add_option("--out", eval_out, "Output directory (default runs/evaluate-<timestamp>)");

  // predict
  auto* pred_cmd = app.add_subcommand("predict", "Forecast the next-second RSRP and grade");
  std::string pred_model;
  std::vector<std::string> pred_inputs;
  int horizon = 1;
  std::optional<std::string> pred_out;
  pred_cmd->add_option("--model", pred_model, "Model file")->required();
  pred_cmd->add_option("traces", pred_inputs, "Trace CSV files")->required();
  pred_cmd->add_option("--horizon", horizon, "Steps ahead (only 1 is supported)");
  pred_cmd->add_option("--out", pred_out, "Output directory (default runs/predict-<timestamp>)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth) return cmd_synth(synth_length, synth_spec, synth_seed, synth_out);
    if (*train_cmd) return cmd_train(resolve_config(overrides, train_inputs), train_out);
    if (*eval_cmd) return cmd_evaluate(eval_model, eval_inputs, eval_subset, eval_out);
    if (*pred_cmd) return cmd_predict(pred_model, pred_inputs, horizon, pred_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace lqe::cli
