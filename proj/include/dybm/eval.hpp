#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dybm/ggd.hpp"
#include "dybm/series.hpp"
#include "dybm/variance.hpp"

namespace dybm {

/// Root mean squared error of two equal-length sequences.
double rmse(std::span<const double> pred, std::span<const double> truth);

/// Sample Pearson correlation; throws on constant input or length < 2.
double pearson(std::span<const double> a, std::span<const double> b);

struct GarchSim {
  std::vector<double> errors;
  std::vector<double> sigma2;  // conditional variance of the paired error
};

/// Simulates a stationary (1,1) variance recursion with standard normal
/// innovations; the first `burn_in` steps are discarded.
GarchSim gen_garch_series(const GarchParams& params, std::size_t n, std::uint64_t seed,
                          std::size_t burn_in = 500);

/// AR(1) with generalized-Gaussian innovations: x_t = phi*x_{t-1} + eps_t.
SeriesFrame gen_ar_ggd_series(double phi, const GgdParams& noise, std::size_t n,
                              std::uint64_t seed, std::size_t burn_in = 500);

/// Flat experiment configuration (parsed from a flat JSON object; unknown
/// keys are rejected).
struct ExperimentConfig {
  // Data source: either a CSV path or a generator name ("ar_ggd" | "garch").
  std::string data_path;
  std::string data_kind = "returns";  // "prices" applies the returns transform first
  std::string value_column;           // empty selects every value column
  std::string generator;
  double phi = 0.6;
  double gen_rho = 1.0;
  double gen_beta = 2.0;
  double gen_a0 = 0.1;
  double gen_a1 = 0.1;
  double gen_b1 = 0.8;
  std::size_t n = 6000;

  // Mean-model hyperparameters.
  std::size_t train_len = 0;  // 0 selects half the series
  std::size_t d = 10;
  std::vector<double> lambdas{0.1, 0.9};
  double eta = 0.01;
  int epochs = 5;
  std::size_t readjust_period = 100;
  std::string step_rule = "adagrad";  // "adagrad" | "sgd"

  // Variance-experiment hyperparameters.
  double lambda_var = 0.97;
  double l1_weight = 0.0;
  int var_iters = 3000;
  double var_step = 0.0;  // <= 0 selects the automatic step

  std::uint64_t seed = 0;
};

ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
nlohmann::json experiment_config_to_json(const ExperimentConfig& config);

/// Named scalar metrics plus an echo of the configuration that produced them.
/// Wall-clock time is kept out of the serialized form unless explicitly
/// requested so that identical runs produce identical reports.
struct MetricsReport {
  std::map<std::string, double> metrics;
  nlohmann::json config_echo;
  double runtime_seconds = 0.0;

  nlohmann::json to_json(bool include_timing = false) const;
};

/// Returns-space data preparation shared by the experiment harnesses:
/// (prices -> returns when data_kind == "prices") -> standardize by the
/// training split's population std. Returns the standardized full series.
SeriesFrame prepare_standardized_returns(const ExperimentConfig& config, std::size_t train_len);

/// Trains the Gaussian and generalized-Gaussian mean models with identical
/// settings and reports train/test RMSE for both plus the final shape.
///
/// Protocol: the models sweep the training split for `epochs` epochs;
/// training-split predictions are the online one-step predictions of the
/// last epoch, after which learning continues uninterrupted through the test
/// split (the generalized model keeps readjusting its noise shape there, so
/// final_rho reflects the end of testing). With epochs == 0 both models stay
/// at zero and the split RMSEs coincide.
MetricsReport run_mean_experiment(const ExperimentConfig& config);

/// Fits the (1,1) quasi-likelihood baseline and the batch variance predictor
/// on the first half of an error sequence, then reports the Pearson
/// correlation between predicted variances and realized squared errors on
/// both halves. Errors come from the "garch" generator or from the residuals
/// of a freshly trained Gaussian mean model.
MetricsReport run_variance_experiment(const ExperimentConfig& config);

}  // namespace dybm
