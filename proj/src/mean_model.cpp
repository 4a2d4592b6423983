#include "dybm/mean_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dybm {

namespace {

void check_vector(std::span<const double> v, std::size_t n, const char* what) {
  if (v.size() != n) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch");
  }
}

}  // namespace

std::pair<MeanModelParams, MeanModelState> new_mean_model(std::size_t dim, std::size_t lag,
                                                          std::vector<double> decay) {
  if (dim < 1) throw std::invalid_argument("new_mean_model: dim must be >= 1");
  if (lag < 2) throw std::invalid_argument("new_mean_model: lag must be >= 2");
  if (decay.empty()) throw std::invalid_argument("new_mean_model: need at least one decay rate");
  for (double l : decay) {
    if (!(l > 0.0 && l < 1.0)) {
      throw std::invalid_argument("new_mean_model: decay rates must lie in (0,1)");
    }
  }

  MeanModelParams params;
  params.dim = dim;
  params.lag = lag;
  params.decay = std::move(decay);
  params.bias.assign(dim, 0.0);
  params.lag_weight.assign(lag - 1, Matrix(dim, dim));
  params.trace_weight.assign(params.decay.size(), Matrix(dim, dim));
  params.sigma.assign(dim, 1.0);

  MeanModelState state;
  reset_state(params, state);
  return {std::move(params), std::move(state)};
}

void reset_state(const MeanModelParams& params, MeanModelState& state) {
  state.window.assign(params.lag - 1, std::vector<double>(params.dim, 0.0));
  state.trace.assign(params.modes(), std::vector<double>(params.dim, 0.0));
}

std::vector<double> predict_mean(const MeanModelParams& params, const MeanModelState& state) {
  if (state.window.size() != params.lag - 1 || state.trace.size() != params.modes()) {
    throw std::invalid_argument("predict_mean: state/parameter shape mismatch");
  }
  std::vector<double> mu = params.bias;
  for (std::size_t i = 0; i < params.lag_weight.size(); ++i) {
    params.lag_weight[i].add_matvec(state.window[i], mu);
  }
  for (std::size_t k = 0; k < params.trace_weight.size(); ++k) {
    params.trace_weight[k].add_matvec(state.trace[k], mu);
  }
  return mu;
}

double gaussian_loglik(std::span<const double> x, std::span<const double> mu,
                       std::span<const double> sigma) {
  check_vector(mu, x.size(), "gaussian_loglik");
  check_vector(sigma, x.size(), "gaussian_loglik");
  double ll = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double s = sigma[j];
    if (!(s > 0.0)) throw std::invalid_argument("gaussian_loglik: sigma must be positive");
    const double e = x[j] - mu[j];
    ll += -0.5 * std::log(2.0 * std::numbers::pi * s * s) - e * e / (2.0 * s * s);
  }
  return ll;
}

GradAccum make_grad_accum(const MeanModelParams& params) {
  GradAccum accum;
  accum.bias.assign(params.dim, 0.0);
  accum.lag_weight.assign(params.lag_weight.size(), Matrix(params.dim, params.dim));
  accum.trace_weight.assign(params.trace_weight.size(), Matrix(params.dim, params.dim));
  return accum;
}

namespace {

constexpr double kAdagradEps = 1e-6;

inline double scaled_step(double lr, double grad, StepRule rule, double& acc) {
  if (rule == StepRule::sgd) return lr * grad;
  acc += grad * grad;
  return lr * grad / (std::sqrt(acc) + kAdagradEps);
}

}  // namespace

void apply_score_update(MeanModelParams& params, const MeanModelState& state,
                        std::span<const double> score, double lr, StepRule rule,
                        GradAccum* accum) {
  check_vector(score, params.dim, "apply_score_update");
  if (rule == StepRule::adagrad && accum == nullptr) {
    throw std::invalid_argument("apply_score_update: adagrad requires an accumulator");
  }
  if (rule == StepRule::sgd) {
    for (std::size_t j = 0; j < params.dim; ++j) params.bias[j] += lr * score[j];
    for (std::size_t i = 0; i < params.lag_weight.size(); ++i) {
      params.lag_weight[i].add_outer(lr, score, state.window[i]);
    }
    for (std::size_t k = 0; k < params.trace_weight.size(); ++k) {
      params.trace_weight[k].add_outer(lr, score, state.trace[k]);
    }
    return;
  }
  for (std::size_t j = 0; j < params.dim; ++j) {
    params.bias[j] += scaled_step(lr, score[j], rule, accum->bias[j]);
  }
  for (std::size_t i = 0; i < params.lag_weight.size(); ++i) {
    Matrix& w = params.lag_weight[i];
    Matrix& a = accum->lag_weight[i];
    for (std::size_t r = 0; r < params.dim; ++r) {
      for (std::size_t c = 0; c < params.dim; ++c) {
        w(r, c) += scaled_step(lr, score[r] * state.window[i][c], rule, a(r, c));
      }
    }
  }
  for (std::size_t k = 0; k < params.trace_weight.size(); ++k) {
    Matrix& u = params.trace_weight[k];
    Matrix& a = accum->trace_weight[k];
    for (std::size_t r = 0; r < params.dim; ++r) {
      for (std::size_t c = 0; c < params.dim; ++c) {
        u(r, c) += scaled_step(lr, score[r] * state.trace[k][c], rule, a(r, c));
      }
    }
  }
}

void mean_sgd_step(MeanModelParams& params, const MeanModelState& state,
                   std::span<const double> x_t, double lr, bool update_sigma) {
  if (!(lr > 0.0)) throw std::invalid_argument("mean_sgd_step: learning rate must be positive");
  check_vector(x_t, params.dim, "mean_sgd_step");

  const std::vector<double> mu = predict_mean(params, state);
  std::vector<double> grad(params.dim);
  std::vector<double> err(params.dim);
  for (std::size_t j = 0; j < params.dim; ++j) {
    err[j] = x_t[j] - mu[j];
    grad[j] = err[j] / (params.sigma[j] * params.sigma[j]);
    if (!std::isfinite(grad[j])) {
      throw std::runtime_error("mean_sgd_step: non-finite gradient (divergence; lower lr)");
    }
  }

  apply_score_update(params, state, grad, lr, StepRule::sgd, nullptr);
  if (update_sigma) {
    for (std::size_t j = 0; j < params.dim; ++j) {
      const double s = params.sigma[j];
      params.sigma[j] += lr * (-1.0 / s + err[j] * err[j] / (s * s * s));
      if (params.sigma[j] < 1e-8) params.sigma[j] = 1e-8;
    }
  }
}

void advance_state(const MeanModelParams& params, MeanModelState& state,
                   std::span<const double> x_t) {
  check_vector(x_t, params.dim, "advance_state");
  const std::vector<double> oldest = std::move(state.window.back());
  state.window.pop_back();
  for (std::size_t k = 0; k < params.modes(); ++k) {
    const double l = params.decay[k];
    for (std::size_t j = 0; j < params.dim; ++j) {
      state.trace[k][j] = l * state.trace[k][j] + oldest[j];
    }
  }
  state.window.emplace_front(x_t.begin(), x_t.end());
}

std::vector<std::vector<double>> predict_series(const MeanModelParams& params,
                                                const SeriesFrame& series) {
  MeanModelState state;
  reset_state(params, state);
  std::vector<std::vector<double>> preds;
  preds.reserve(series.size());
  for (std::size_t t = 0; t < series.size(); ++t) {
    preds.push_back(predict_mean(params, state));
    advance_state(params, state, series.values[t]);
  }
  return preds;
}

std::vector<std::vector<double>> train_online(MeanModelParams& params, MeanModelState& state,
                                              const SeriesFrame& series, int epochs, double lr,
                                              StepRule rule) {
  if (epochs < 0) throw std::invalid_argument("train_online: epochs must be >= 0");
  if (!(lr > 0.0)) throw std::invalid_argument("train_online: learning rate must be positive");
  if (series.size() < 1 || series.dim() != params.dim) {
    throw std::invalid_argument("train_online: series shape mismatch");
  }
  if (epochs == 0) return {};

  GradAccum accum = make_grad_accum(params);
  std::vector<double> score(params.dim);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    reset_state(params, state);
    for (std::size_t t = 0; t < series.size(); ++t) {
      const std::vector<double> mu = predict_mean(params, state);
      for (std::size_t j = 0; j < params.dim; ++j) {
        score[j] = (series.values[t][j] - mu[j]) / (params.sigma[j] * params.sigma[j]);
        if (!std::isfinite(score[j])) {
          throw std::runtime_error("train_online: non-finite gradient (divergence; lower lr)");
        }
      }
      apply_score_update(params, state, score, lr, rule, &accum);
      advance_state(params, state, series.values[t]);
    }
  }

  // Learning-free pass; leaves `state` at the end of the series so a caller
  // can keep predicting past it.
  reset_state(params, state);
  std::vector<std::vector<double>> preds;
  preds.reserve(series.size());
  for (std::size_t t = 0; t < series.size(); ++t) {
    preds.push_back(predict_mean(params, state));
    advance_state(params, state, series.values[t]);
  }
  return preds;
}

}  // namespace dybm
