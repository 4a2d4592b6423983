#include "dybm/eval.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "dybm/mean_model.hpp"
#include "dybm/rng.hpp"

namespace dybm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> flatten(const std::vector<std::vector<double>>& rows, std::size_t begin,
                            std::size_t end) {
  std::vector<double> out;
  out.reserve((end - begin) * (rows.empty() ? 0 : rows.front().size()));
  for (std::size_t t = begin; t < end; ++t) {
    out.insert(out.end(), rows[t].begin(), rows[t].end());
  }
  return out;
}

void check_finite(const MetricsReport& report) {
  for (const auto& [name, value] : report.metrics) {
    if (!std::isfinite(value)) {
      throw std::runtime_error("experiment: non-finite metric '" + name + "'");
    }
  }
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw std::invalid_argument("rmse: sequences must have equal nonzero length");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw std::invalid_argument("pearson: sequences must have equal length >= 2");
  }
  const double n = static_cast<double>(a.size());
  double mean_a = 0.0;
  double mean_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= n;
  mean_b /= n;
  double cov = 0.0;
  double var_a = 0.0;
  double var_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (!(var_a > 0.0) || !(var_b > 0.0)) {
    throw std::invalid_argument("pearson: constant input");
  }
  return cov / std::sqrt(var_a * var_b);
}

GarchSim gen_garch_series(const GarchParams& params, std::size_t n, std::uint64_t seed,
                          std::size_t burn_in) {
  if (params.p() != 1 || params.q() != 1) {
    throw std::invalid_argument("gen_garch_series: requires a (1,1) model");
  }
  const double lrv = garch_long_run_variance(params);  // also checks stationarity
  if (n < 1) throw std::invalid_argument("gen_garch_series: n must be >= 1");

  Rng rng(seed);
  GarchSim sim;
  sim.errors.reserve(n);
  sim.sigma2.reserve(n);
  double s2 = lrv;
  for (std::size_t t = 0; t < burn_in + n; ++t) {
    const double e = std::sqrt(s2) * rng.normal();
    if (t >= burn_in) {
      sim.sigma2.push_back(s2);
      sim.errors.push_back(e);
    }
    s2 = params.a0 + params.a[0] * e * e + params.b[0] * s2;
  }
  return sim;
}

SeriesFrame gen_ar_ggd_series(double phi, const GgdParams& noise, std::size_t n,
                              std::uint64_t seed, std::size_t burn_in) {
  if (!(std::abs(phi) < 1.0)) {
    throw std::invalid_argument("gen_ar_ggd_series: |phi| must be < 1");
  }
  if (n < 1) throw std::invalid_argument("gen_ar_ggd_series: n must be >= 1");
  Rng rng(seed);
  const std::vector<double> eps = sample_ggd(0.0, noise, burn_in + n, rng);
  std::vector<double> values;
  values.reserve(n);
  double x = 0.0;
  for (std::size_t t = 0; t < burn_in + n; ++t) {
    x = phi * x + eps[t];
    if (t >= burn_in) values.push_back(x);
  }
  return series_from_values(values);
}

ExperimentConfig parse_experiment_config(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("config: expected a JSON object");
  ExperimentConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    if (key == "data_path") {
      cfg.data_path = value.get<std::string>();
    } else if (key == "data_kind") {
      cfg.data_kind = value.get<std::string>();
    } else if (key == "value_column") {
      cfg.value_column = value.get<std::string>();
    } else if (key == "generator") {
      cfg.generator = value.get<std::string>();
    } else if (key == "phi") {
      cfg.phi = value.get<double>();
    } else if (key == "gen_rho") {
      cfg.gen_rho = value.get<double>();
    } else if (key == "gen_beta") {
      cfg.gen_beta = value.get<double>();
    } else if (key == "gen_a0") {
      cfg.gen_a0 = value.get<double>();
    } else if (key == "gen_a1") {
      cfg.gen_a1 = value.get<double>();
    } else if (key == "gen_b1") {
      cfg.gen_b1 = value.get<double>();
    } else if (key == "n") {
      cfg.n = value.get<std::size_t>();
    } else if (key == "train_len") {
      cfg.train_len = value.get<std::size_t>();
    } else if (key == "d") {
      cfg.d = value.get<std::size_t>();
    } else if (key == "lambdas") {
      cfg.lambdas = value.get<std::vector<double>>();
    } else if (key == "eta") {
      cfg.eta = value.get<double>();
    } else if (key == "epochs") {
      cfg.epochs = value.get<int>();
    } else if (key == "readjust_period") {
      cfg.readjust_period = value.get<std::size_t>();
    } else if (key == "step_rule") {
      cfg.step_rule = value.get<std::string>();
    } else if (key == "lambda_var") {
      cfg.lambda_var = value.get<double>();
    } else if (key == "l1_weight") {
      cfg.l1_weight = value.get<double>();
    } else if (key == "var_iters") {
      cfg.var_iters = value.get<int>();
    } else if (key == "var_step") {
      cfg.var_step = value.get<double>();
    } else if (key == "seed") {
      cfg.seed = value.get<std::uint64_t>();
    } else {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
  if (cfg.data_path.empty() && cfg.generator.empty()) {
    throw std::invalid_argument("config: need data_path or generator");
  }
  if (!cfg.data_path.empty() && !cfg.generator.empty()) {
    throw std::invalid_argument("config: data_path and generator are mutually exclusive");
  }
  return cfg;
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json doc;
  if (!cfg.data_path.empty()) {
    doc["data_path"] = cfg.data_path;
    doc["data_kind"] = cfg.data_kind;
    if (!cfg.value_column.empty()) doc["value_column"] = cfg.value_column;
  }
  if (!cfg.generator.empty()) {
    doc["generator"] = cfg.generator;
    doc["n"] = cfg.n;
    if (cfg.generator == "ar_ggd") {
      doc["phi"] = cfg.phi;
      doc["gen_rho"] = cfg.gen_rho;
      doc["gen_beta"] = cfg.gen_beta;
    } else if (cfg.generator == "garch") {
      doc["gen_a0"] = cfg.gen_a0;
      doc["gen_a1"] = cfg.gen_a1;
      doc["gen_b1"] = cfg.gen_b1;
    }
  }
  doc["train_len"] = cfg.train_len;
  doc["d"] = cfg.d;
  doc["lambdas"] = cfg.lambdas;
  doc["eta"] = cfg.eta;
  doc["epochs"] = cfg.epochs;
  doc["readjust_period"] = cfg.readjust_period;
  doc["step_rule"] = cfg.step_rule;
  doc["lambda_var"] = cfg.lambda_var;
  doc["l1_weight"] = cfg.l1_weight;
  doc["var_iters"] = cfg.var_iters;
  doc["var_step"] = cfg.var_step;
  doc["seed"] = cfg.seed;
  return doc;
}

nlohmann::json MetricsReport::to_json(bool include_timing) const {
  nlohmann::json doc;
  nlohmann::json m = nlohmann::json::object();
  for (const auto& [name, value] : metrics) m[name] = value;
  doc["metrics"] = m;
  doc["config"] = config_echo;
  if (include_timing) doc["runtime_seconds"] = runtime_seconds;
  return doc;
}

namespace {

SeriesFrame load_experiment_series(const ExperimentConfig& cfg) {
  if (!cfg.generator.empty()) {
    if (cfg.generator == "ar_ggd") {
      return gen_ar_ggd_series(cfg.phi, GgdParams{cfg.gen_rho, cfg.gen_beta}, cfg.n, cfg.seed);
    }
    throw std::invalid_argument("experiment: unsupported series generator '" + cfg.generator +
                                "' (expected ar_ggd)");
  }
  std::vector<std::string> columns;
  if (!cfg.value_column.empty()) columns.push_back(cfg.value_column);
  SeriesFrame series = load_price_csv(cfg.data_path, columns);
  if (cfg.data_kind == "prices") return to_returns(series);
  if (cfg.data_kind == "returns") return series;
  throw std::invalid_argument("experiment: data_kind must be 'prices' or 'returns'");
}

std::size_t resolve_train_len(const ExperimentConfig& cfg, std::size_t total) {
  const std::size_t train_len = cfg.train_len == 0 ? total / 2 : cfg.train_len;
  if (train_len == 0 || train_len >= total) {
    throw std::invalid_argument("experiment: train_len out of range for series of length " +
                                std::to_string(total));
  }
  return train_len;
}

SeriesFrame standardize_by_train_split(const SeriesFrame& returns, std::size_t train_len) {
  // Scale statistics come from the training split only and are applied to the
  // whole series.
  const auto [train, test] = split(returns, train_len);
  const auto [train_std, stats] = standardize(train);
  (void)train_std;
  auto [full_std, used] = standardize(returns, stats);
  (void)used;
  return std::move(full_std);
}

StepRule parse_step_rule(const std::string& name) {
  if (name == "sgd") return StepRule::sgd;
  if (name == "adagrad") return StepRule::adagrad;
  throw std::invalid_argument("experiment: step_rule must be 'sgd' or 'adagrad'");
}

struct ProtocolResult {
  std::vector<std::vector<double>> preds;  // one-step predictions over the full series
  std::vector<GgdParams> dist;             // final noise parameters (generalized model only)
};

// Shared comparison protocol: `epochs` online sweeps of the training split
// (predictions recorded during the last one), then learning continues through
// the test split without a state reset.
ProtocolResult run_protocol(const SeriesFrame& series, std::size_t train_len,
                            const ExperimentConfig& cfg, bool generalized) {
  auto [params, state] = new_mean_model(series.dim(), cfg.d, cfg.lambdas);
  const StepRule rule = parse_step_rule(cfg.step_rule);
  if (generalized && cfg.readjust_period < 2) {
    throw std::invalid_argument("experiment: readjust_period must be >= 2");
  }

  ProtocolResult out;
  out.dist.assign(series.dim(), GgdParams{});
  if (cfg.epochs == 0) {
    out.preds = predict_series(params, series);
    return out;
  }

  GradAccum accum = make_grad_accum(params);
  std::vector<std::vector<double>> records(series.dim());
  std::vector<char> live(series.dim(), 0);
  std::vector<double> score(series.dim());
  std::size_t steps = 0;
  out.preds.reserve(series.size());

  const auto online_step = [&](std::size_t t, bool record) {
    const std::vector<double> mu = predict_mean(params, state);
    for (std::size_t j = 0; j < series.dim(); ++j) {
      if (!std::isfinite(mu[j])) {
        throw std::runtime_error("experiment: non-finite prediction (divergence)");
      }
      const double x = series.values[t][j];
      if (generalized) {
        score[j] = ggd_grad_mu(x, mu[j], out.dist[j]);
        const double residual = x - mu[j];
        records[j].push_back(residual);
        if (std::abs(residual) > kResidualFloor) live[j] = 1;
      } else {
        score[j] = (x - mu[j]) / (params.sigma[j] * params.sigma[j]);
      }
    }
    if (record) out.preds.push_back(mu);
    apply_score_update(params, state, score, cfg.eta, rule, &accum);
    ++steps;
    if (generalized && steps % cfg.readjust_period == 0) {
      for (std::size_t j = 0; j < series.dim(); ++j) {
        if (live[j]) out.dist[j] = readjust_from_record(out.dist[j], records[j]);
      }
    }
    advance_state(params, state, series.values[t]);
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    reset_state(params, state);
    const bool record = epoch + 1 == cfg.epochs;
    for (std::size_t t = 0; t < train_len; ++t) online_step(t, record);
  }
  for (std::size_t t = train_len; t < series.size(); ++t) online_step(t, true);
  return out;
}

}  // namespace

SeriesFrame prepare_standardized_returns(const ExperimentConfig& cfg, std::size_t train_len) {
  return standardize_by_train_split(load_experiment_series(cfg), train_len);
}

MetricsReport run_mean_experiment(const ExperimentConfig& cfg) {
  const auto start = Clock::now();

  const SeriesFrame raw = load_experiment_series(cfg);
  const std::size_t train_len = resolve_train_len(cfg, raw.size());
  const SeriesFrame series = standardize_by_train_split(raw, train_len);
  const std::size_t total = series.size();

  MetricsReport report;
  report.config_echo = experiment_config_to_json(cfg);
  report.config_echo["train_len"] = train_len;

  const std::vector<double> truth_train = flatten(series.values, 0, train_len);
  const std::vector<double> truth_test = flatten(series.values, train_len, total);

  {
    const ProtocolResult gauss = run_protocol(series, train_len, cfg, /*generalized=*/false);
    report.metrics["rmse_train_gaussian"] = rmse(flatten(gauss.preds, 0, train_len), truth_train);
    report.metrics["rmse_test_gaussian"] =
        rmse(flatten(gauss.preds, train_len, total), truth_test);
  }
  {
    const ProtocolResult gen = run_protocol(series, train_len, cfg, /*generalized=*/true);
    report.metrics["rmse_train_ggd"] = rmse(flatten(gen.preds, 0, train_len), truth_train);
    report.metrics["rmse_test_ggd"] = rmse(flatten(gen.preds, train_len, total), truth_test);
    report.metrics["final_rho"] = gen.dist.front().rho;
    report.metrics["final_beta"] = gen.dist.front().beta;
  }

  report.runtime_seconds = seconds_since(start);
  check_finite(report);
  return report;
}

MetricsReport run_variance_experiment(const ExperimentConfig& cfg) {
  const auto start = Clock::now();

  MetricsReport report;
  report.config_echo = experiment_config_to_json(cfg);

  std::vector<double> errors;
  if (cfg.generator == "garch") {
    GarchParams truth;
    truth.a0 = cfg.gen_a0;
    truth.a = {cfg.gen_a1};
    truth.b = {cfg.gen_b1};
    errors = gen_garch_series(truth, cfg.n, cfg.seed).errors;
  } else {
    // Residuals of a freshly trained Gaussian mean model over the full
    // series (same protocol as the mean experiment), one-dimensional by
    // construction of the experiment data.
    const SeriesFrame raw = load_experiment_series(cfg);
    const std::size_t train_len = resolve_train_len(cfg, raw.size());
    const SeriesFrame series = standardize_by_train_split(raw, train_len);
    if (series.dim() != 1) {
      throw std::invalid_argument("run_variance_experiment: residual source must be 1-D");
    }
    const ProtocolResult gauss = run_protocol(series, train_len, cfg, /*generalized=*/false);
    errors.reserve(series.size());
    for (std::size_t t = 0; t < series.size(); ++t) {
      errors.push_back(series.values[t][0] - gauss.preds[t][0]);
    }
  }

  if (errors.size() < 200) {
    throw std::invalid_argument("run_variance_experiment: need at least 200 errors");
  }
  const std::size_t half = errors.size() / 2;
  const std::span<const double> all(errors);
  const std::span<const double> first_half = all.subspan(0, half);

  std::vector<double> e2(errors.size());
  for (std::size_t t = 0; t < errors.size(); ++t) e2[t] = errors[t] * errors[t];
  double train_var = 0.0;
  for (std::size_t t = 0; t < half; ++t) train_var += e2[t];
  train_var /= static_cast<double>(half);

  const GarchParams garch = fit_garch11_qmle(first_half);
  const VarModelParams dybm = fit_variance_batch(first_half, 1, 1, {cfg.lambda_var},
                                                 cfg.l1_weight, cfg.var_iters, cfg.var_step);

  const std::vector<double> garch_path = garch_sigma2_path(garch, all, train_var);
  const std::vector<double> dybm_path = dybm_sigma2_path(dybm, all);

  const auto half_pearson = [&](const std::vector<double>& path, bool second) {
    const std::size_t begin = second ? half : 0;
    const std::size_t end = second ? errors.size() : half;
    return pearson(std::span<const double>(path).subspan(begin, end - begin),
                   std::span<const double>(e2).subspan(begin, end - begin));
  };

  report.metrics["pearson_train_garch"] = half_pearson(garch_path, false);
  report.metrics["pearson_test_garch"] = half_pearson(garch_path, true);
  report.metrics["pearson_train_dybm"] = half_pearson(dybm_path, false);
  report.metrics["pearson_test_dybm"] = half_pearson(dybm_path, true);
  report.metrics["garch_a0"] = garch.a0;
  report.metrics["garch_a1"] = garch.a[0];
  report.metrics["garch_b1"] = garch.b[0];
  report.metrics["dybm_v0"] = dybm.v0;
  report.metrics["dybm_w1"] = dybm.w[0];
  report.metrics["dybm_u1"] = dybm.u[0];

  report.runtime_seconds = seconds_since(start);
  check_finite(report);
  return report;
}

}  // namespace dybm
