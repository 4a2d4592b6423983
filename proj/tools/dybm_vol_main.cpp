// dybm-vol: command-line front end for the DyBM volatility forecasting
// library. One subcommand per pipeline stage; JSON for models, configs and
// reports, CSV for series and forecasts. Exit codes: 0 success, 1 module
// error, 2 usage error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dybm/eval.hpp"
#include "dybm/ggd.hpp"
#include "dybm/mean_model.hpp"
#include "dybm/model_io.hpp"
#include "dybm/series.hpp"
#include "dybm/variance.hpp"

namespace {

std::vector<double> load_error_column(const std::string& path, const std::string& column_name) {
  std::vector<std::string> columns;
  if (!column_name.empty()) columns.push_back(column_name);
  const dybm::SeriesFrame frame = dybm::load_price_csv(path, columns);
  if (frame.dim() != 1) {
    throw std::runtime_error("'" + path + "' has " + std::to_string(frame.dim()) +
                             " value columns; pick one with --column");
  }
  return dybm::column(frame, 0);
}

dybm::SeriesFrame load_input_series(const std::string& path,
                                    const std::vector<std::string>& columns, bool prices,
                                    bool do_standardize) {
  dybm::SeriesFrame series = dybm::load_price_csv(path, columns);
  if (prices) series = dybm::to_returns(series);
  if (do_standardize) {
    auto [out, stats] = dybm::standardize(series);
    (void)stats;
    series = std::move(out);
  }
  return series;
}

void write_predictions_csv(const dybm::SeriesFrame& series,
                           const std::vector<std::vector<double>>& preds,
                           const std::string& path) {
  dybm::SeriesFrame out;
  out.timestamps = series.timestamps;
  out.values = preds;
  std::vector<std::string> names;
  if (series.dim() == 1) {
    names = {"prediction"};
  } else {
    for (std::size_t j = 0; j < series.dim(); ++j) {
      names.push_back("prediction" + std::to_string(j + 1));
    }
  }
  dybm::write_series_csv(out, path, names);
}

void emit_text(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open '" + out_path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + out_path + "'");
}

struct IngestArgs {
  std::string input;
  std::string output;
  std::string stats_out;
  std::vector<std::string> columns;
  bool keep_prices = false;
  bool do_standardize = false;
  std::size_t stats_len = 0;
};

void run_ingest(const IngestArgs& args) {
  std::vector<std::string> names;
  dybm::SeriesFrame series = dybm::load_price_csv(args.input, args.columns, &names);
  if (!args.keep_prices) series = dybm::to_returns(series);
  std::optional<dybm::ScalingInfo> stats;
  if (args.do_standardize) {
    if (args.stats_len > 0 && args.stats_len < series.size()) {
      const auto [head, tail] = dybm::split(series, args.stats_len);
      stats = dybm::standardize(head).second;
    } else {
      stats = dybm::standardize(series).second;
    }
    auto [out, used] = dybm::standardize(series, stats);
    series = std::move(out);
    stats = std::move(used);
  }
  dybm::write_series_csv(series, args.output, names);
  if (!args.stats_out.empty()) {
    std::map<std::string, double> report;
    if (stats) {
      for (std::size_t j = 0; j < stats->stddev.size(); ++j) {
        report["stddev_" + std::to_string(j)] = stats->stddev[j];
        report["mean_" + std::to_string(j)] = stats->mean[j];
      }
    }
    dybm::write_report_json(report, args.stats_out);
  }
}

struct TrainArgs {
  std::string input;
  std::string output;
  std::string pred_out;
  std::vector<std::string> columns;
  bool prices = false;
  bool do_standardize = false;
  std::size_t lag = 10;
  std::vector<double> decay;
  double lr = 0.01;
  int epochs = 5;
  bool adaptive = false;
  // generalized-Gaussian extras
  std::size_t readjust_period = 100;
  double rho0 = 2.0;
  double beta0 = 0.5;
  bool no_readjust = false;
  bool scale_first = false;
};

void run_train(const TrainArgs& args, bool generalized) {
  std::vector<double> decay = args.decay.empty() ? std::vector<double>{0.1, 0.9} : args.decay;
  const dybm::SeriesFrame series =
      load_input_series(args.input, args.columns, args.prices, args.do_standardize);
  auto [params, state] = dybm::new_mean_model(series.dim(), args.lag, std::move(decay));

  const dybm::StepRule rule = args.adaptive ? dybm::StepRule::adagrad : dybm::StepRule::sgd;
  nlohmann::json doc;
  std::vector<std::vector<double>> preds;
  if (generalized) {
    std::vector<dybm::GgdParams> dist(series.dim(), dybm::GgdParams{args.rho0, args.beta0});
    auto result = dybm::ggd_train_online(
        params, state, std::move(dist), series, args.epochs, args.lr, args.readjust_period,
        !args.no_readjust,
        args.scale_first ? dybm::ReadjustOrder::scale_first : dybm::ReadjustOrder::shape_first,
        rule);
    doc = dybm::mean_model_to_json(params);
    dybm::attach_ggd_block(doc, result.dist, args.readjust_period);
    preds = std::move(result.predictions);
  } else {
    preds = dybm::train_online(params, state, series, args.epochs, args.lr, rule);
    doc = dybm::mean_model_to_json(params);
  }
  dybm::save_json(doc, args.output);
  if (!args.pred_out.empty()) {
    if (preds.empty()) throw std::runtime_error("no predictions to write (epochs == 0)");
    write_predictions_csv(series, preds, args.pred_out);
  }
}

struct FitVarArgs {
  std::string errors_path;
  std::string column;
  std::string output;
  std::size_t lag = 1;
  std::vector<double> decay;
  double l1 = 0.0;
  int iters = 3000;
  double step = 0.0;
};

void run_fit_var(const FitVarArgs& args) {
  const std::vector<double> errors = load_error_column(args.errors_path, args.column);
  std::vector<double> decay = args.decay.empty() ? std::vector<double>{0.97} : args.decay;
  const std::size_t modes = decay.size();
  const dybm::VarModelParams params = dybm::fit_variance_batch(
      errors, args.lag, modes, std::move(decay), args.l1, args.iters, args.step);
  dybm::save_json(dybm::var_model_to_json(params), args.output);
}

struct ForecastArgs {
  std::string model_path;
  std::string out_path;
  double sigma2 = 1.0;
  double e2 = 0.0;
  long horizon = 10;
  bool check = false;
};

void run_forecast_var(const ForecastArgs& args) {
  const dybm::VarModelParams params = dybm::var_model_from_json(dybm::load_json(args.model_path));

  std::optional<dybm::ForecastConstants> constants;
  try {
    constants = dybm::forecast_constants(params, args.sigma2, args.e2);
  } catch (const std::runtime_error&) {
    // Repeated/complex roots: the recursive forecaster handles these.
  }

  std::string csv = "horizon,sigma2\n";
  char buf[64];
  for (long n = 0; n <= args.horizon; ++n) {
    const double recursive = dybm::dybm_var_forecast_recursive(params, args.sigma2, args.e2, n);
    double value = recursive;
    if (constants) {
      const double closed = dybm::dybm_var_forecast_closed(*constants, n);
      if (args.check) {
        const double scale = std::max({std::abs(closed), std::abs(recursive), 1e-12});
        if (std::abs(closed - recursive) / scale > 1e-6) {
          throw std::runtime_error("forecast check failed at horizon " + std::to_string(n) +
                                   ": closed=" + std::to_string(closed) +
                                   " recursive=" + std::to_string(recursive));
        }
      }
      value = closed;
    }
    std::snprintf(buf, sizeof buf, "%ld,%.17g\n", n, value);
    csv += buf;
  }
  emit_text(csv, args.out_path);
}

struct GenDataArgs {
  std::string kind;
  std::string out_path;
  std::size_t n = 6000;
  std::uint64_t seed = 0;
  double a0 = 0.1, a1 = 0.1, b1 = 0.8;
  double phi = 0.6, rho = 1.0, beta = 2.0;
};

void run_gen_data(const GenDataArgs& args) {
  if (args.kind == "garch") {
    dybm::GarchParams params;
    params.a0 = args.a0;
    params.a = {args.a1};
    params.b = {args.b1};
    const dybm::GarchSim sim = dybm::gen_garch_series(params, args.n, args.seed);
    dybm::SeriesFrame frame;
    char buf[16];
    for (std::size_t t = 0; t < sim.errors.size(); ++t) {
      std::snprintf(buf, sizeof buf, "t%08zu", t);
      frame.timestamps.emplace_back(buf);
      frame.values.push_back({sim.errors[t], sim.sigma2[t]});
    }
    dybm::write_series_csv(frame, args.out_path, {"e", "sigma2"});
  } else if (args.kind == "ar-ggd") {
    const dybm::SeriesFrame frame =
        dybm::gen_ar_ggd_series(args.phi, dybm::GgdParams{args.rho, args.beta}, args.n, args.seed);
    dybm::write_series_csv(frame, args.out_path);
  } else {
    throw std::runtime_error("unknown --kind '" + args.kind + "' (expected garch or ar-ggd)");
  }
}

struct EvaluateArgs {
  std::string pred_path;
  std::string truth_path;
  std::string pred_column;
  std::string truth_column;
  std::string out_path;
};

void run_evaluate(const EvaluateArgs& args) {
  const std::vector<double> pred = load_error_column(args.pred_path, args.pred_column);
  const std::vector<double> truth = load_error_column(args.truth_path, args.truth_column);
  nlohmann::json doc;
  doc["rmse"] = dybm::rmse(pred, truth);
  doc["pearson"] = dybm::pearson(pred, truth);
  emit_text(doc.dump(2) + "\n", args.out_path);
}

struct ExperimentArgs {
  std::string config_path;
  std::string out_path;
  bool timing = false;
  std::optional<std::uint64_t> seed_override;
};

void run_experiment(const ExperimentArgs& args, bool variance) {
  dybm::ExperimentConfig cfg = dybm::parse_experiment_config(dybm::load_json(args.config_path));
  if (args.seed_override) cfg.seed = *args.seed_override;
  const dybm::MetricsReport report =
      variance ? dybm::run_variance_experiment(cfg) : dybm::run_mean_experiment(cfg);
  const std::string text = report.to_json(args.timing).dump(2) + "\n";
  std::cout << text;
  if (!args.out_path.empty()) emit_text(text, args.out_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DyBM volatility forecasting toolkit"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand(
      "ingest", "Load a price CSV, compute returns, optionally standardize");
  ingest_cmd->add_option("--input", ingest.input, "input CSV")->required();
  ingest_cmd->add_option("--out", ingest.output, "output CSV")->required();
  ingest_cmd->add_option("--column", ingest.columns, "value column name (repeatable)");
  ingest_cmd->add_flag("--no-returns", ingest.keep_prices, "skip the returns transform");
  ingest_cmd->add_flag("--standardize", ingest.do_standardize, "divide by the std deviation");
  ingest_cmd->add_option("--train-len", ingest.stats_len,
                         "compute scale statistics on the first N rows only");
  ingest_cmd->add_option("--stats-out", ingest.stats_out, "write scale statistics JSON");

  TrainArgs train_mean;
  auto* train_mean_cmd =
      app.add_subcommand("train-mean", "Train the Gaussian mean model online");
  TrainArgs train_ggd;
  auto* train_ggd_cmd = app.add_subcommand(
      "train-ggd", "Train the mean model under generalized-Gaussian noise");
  for (auto [cmd, args] : {std::pair{train_mean_cmd, &train_mean},
                           std::pair{train_ggd_cmd, &train_ggd}}) {
    cmd->add_option("--input", args->input, "input series CSV")->required();
    cmd->add_option("--out", args->output, "output model JSON")->required();
    cmd->add_option("--pred-out", args->pred_out, "write final-pass predictions CSV");
    cmd->add_option("--column", args->columns, "value column name (repeatable)");
    cmd->add_flag("--prices", args->prices, "input holds prices; apply the returns transform");
    cmd->add_flag("--standardize", args->do_standardize, "standardize before training");
    cmd->add_option("--lag", args->lag, "lag horizon d (>= 2)")->check(CLI::Range(2, 100000));
    cmd->add_option("--decay", args->decay, "trace decay rate in (0,1), repeatable")
        ->expected(-1);
    cmd->add_option("--lr", args->lr, "learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--epochs", args->epochs, "training epochs")->check(CLI::NonNegativeNumber);
    cmd->add_flag("--adaptive", args->adaptive,
                  "per-parameter adaptive steps instead of plain SGD");
  }
  train_ggd_cmd->add_option("--readjust-period", train_ggd.readjust_period,
                            "steps between shape/scale readjustments (>= 2)")
      ->check(CLI::Range(2, 1000000));
  train_ggd_cmd->add_option("--rho0", train_ggd.rho0, "initial shape")->check(CLI::PositiveNumber);
  train_ggd_cmd->add_option("--beta0", train_ggd.beta0, "initial inverse variance")
      ->check(CLI::PositiveNumber);
  train_ggd_cmd->add_flag("--no-readjust", train_ggd.no_readjust,
                          "freeze rho/beta at their initial values");
  train_ggd_cmd->add_flag("--scale-first", train_ggd.scale_first,
                          "readjust the inverse variance under the old shape");

  FitVarArgs fit_var;
  auto* fit_var_cmd =
      app.add_subcommand("fit-var", "Batch-fit the variance predictor on an error series");
  fit_var_cmd->add_option("--errors", fit_var.errors_path, "error CSV")->required();
  fit_var_cmd->add_option("--column", fit_var.column, "value column name");
  fit_var_cmd->add_option("--out", fit_var.output, "output model JSON")->required();
  fit_var_cmd->add_option("--lag", fit_var.lag, "squared-error lags d")->check(CLI::PositiveNumber);
  fit_var_cmd->add_option("--lambda-var", fit_var.decay, "trace decay rate, repeatable")
      ->expected(-1);
  fit_var_cmd->add_option("--l1", fit_var.l1, "L1 penalty weight")->check(CLI::NonNegativeNumber);
  fit_var_cmd->add_option("--iters", fit_var.iters, "gradient iterations")
      ->check(CLI::PositiveNumber);
  fit_var_cmd->add_option("--step", fit_var.step, "fixed step size (0 = automatic)");

  FitVarArgs fit_garch;
  auto* fit_garch_cmd =
      app.add_subcommand("fit-garch", "Fit the (1,1) baseline by Gaussian quasi-likelihood");
  fit_garch_cmd->add_option("--errors", fit_garch.errors_path, "error CSV")->required();
  fit_garch_cmd->add_option("--column", fit_garch.column, "value column name");
  fit_garch_cmd->add_option("--out", fit_garch.output, "output model JSON")->required();

  ForecastArgs forecast;
  auto* forecast_cmd =
      app.add_subcommand("forecast-var", "Multi-step variance forecast from a fitted model");
  forecast_cmd->add_option("--model", forecast.model_path, "variance model JSON")->required();
  forecast_cmd->add_option("--sigma2", forecast.sigma2, "current variance")->required();
  forecast_cmd->add_option("--e2", forecast.e2, "last observed squared error")->required();
  forecast_cmd->add_option("--horizon", forecast.horizon, "forecast horizon")
      ->check(CLI::NonNegativeNumber);
  forecast_cmd->add_option("--out", forecast.out_path, "output CSV (default stdout)");
  forecast_cmd->add_flag("--check", forecast.check,
                         "assert closed-form/recursive agreement before printing");

  EvaluateArgs evaluate;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "RMSE and Pearson of two series");
  evaluate_cmd->add_option("--pred", evaluate.pred_path, "prediction CSV")->required();
  evaluate_cmd->add_option("--truth", evaluate.truth_path, "target CSV")->required();
  evaluate_cmd->add_option("--pred-column", evaluate.pred_column, "prediction column");
  evaluate_cmd->add_option("--truth-column", evaluate.truth_column, "target column");
  evaluate_cmd->add_option("--out", evaluate.out_path, "output JSON (default stdout)");

  GenDataArgs gen_data;
  auto* gen_data_cmd = app.add_subcommand("gen-data", "Generate synthetic benchmark series");
  gen_data_cmd->add_option("--kind", gen_data.kind, "garch | ar-ggd")->required();
  gen_data_cmd->add_option("--out", gen_data.out_path, "output CSV")->required();
  gen_data_cmd->add_option("--n", gen_data.n, "series length")->check(CLI::PositiveNumber);
  gen_data_cmd->add_option("--seed", gen_data.seed, "random seed");
  gen_data_cmd->add_option("--a0", gen_data.a0, "garch base level");
  gen_data_cmd->add_option("--a1", gen_data.a1, "garch error weight");
  gen_data_cmd->add_option("--b1", gen_data.b1, "garch variance weight");
  gen_data_cmd->add_option("--phi", gen_data.phi, "AR(1) coefficient");
  gen_data_cmd->add_option("--rho", gen_data.rho, "noise shape");
  gen_data_cmd->add_option("--beta", gen_data.beta, "noise inverse variance");

  ExperimentArgs exp_mean;
  auto* exp_mean_cmd = app.add_subcommand(
      "experiment-mean", "Gaussian vs generalized-Gaussian mean-model comparison");
  ExperimentArgs exp_var;
  auto* exp_var_cmd = app.add_subcommand(
      "experiment-var", "Quasi-likelihood baseline vs batch variance predictor comparison");
  for (auto [cmd, args] :
       {std::pair{exp_mean_cmd, &exp_mean}, std::pair{exp_var_cmd, &exp_var}}) {
    cmd->add_option("--config", args->config_path, "experiment config JSON")->required();
    cmd->add_option("--out", args->out_path, "also write the report here");
    cmd->add_flag("--timing", args->timing, "include wall-clock runtime in the report");
    cmd->add_option_function<std::uint64_t>(
        "--seed", [args](const std::uint64_t& s) { args->seed_override = s; },
        "override the config seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (ingest_cmd->parsed()) run_ingest(ingest);
    if (train_mean_cmd->parsed()) run_train(train_mean, false);
    if (train_ggd_cmd->parsed()) run_train(train_ggd, true);
    if (fit_var_cmd->parsed()) run_fit_var(fit_var);
    if (fit_garch_cmd->parsed()) {
      const std::vector<double> errors =
          load_error_column(fit_garch.errors_path, fit_garch.column);
      dybm::save_json(dybm::garch_to_json(dybm::fit_garch11_qmle(errors)), fit_garch.output);
    }
    if (forecast_cmd->parsed()) run_forecast_var(forecast);
    if (evaluate_cmd->parsed()) run_evaluate(evaluate);
    if (gen_data_cmd->parsed()) run_gen_data(gen_data);
    if (exp_mean_cmd->parsed()) run_experiment(exp_mean, false);
    if (exp_var_cmd->parsed()) run_experiment(exp_var, true);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
