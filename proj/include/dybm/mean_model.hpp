#pragma once

#include <deque>
#include <span>
#include <utility>
#include <vector>

#include "dybm/matrix.hpp"
#include "dybm/series.hpp"

namespace dybm {

/// Parameters of the linear mean predictor: a bias, one weight matrix per lag
/// inside the recent window, and one weight matrix per eligibility-trace decay
/// mode summarizing everything older than the window. Decay rates are given
/// and fixed; per-dimension noise std `sigma` is fixed unless a step opts in
/// to updating it.
struct MeanModelParams {
  std::size_t dim = 0;  // N
  std::size_t lag = 0;  // d >= 2; the lag window holds d-1 observations
  std::vector<double> decay;         // K rates, each in (0,1)
  std::vector<double> bias;          // N
  std::vector<Matrix> lag_weight;    // d-1 matrices; lag_weight[i] applies to x_{t-1-i}
  std::vector<Matrix> trace_weight;  // K matrices
  std::vector<double> sigma;         // N, positive

  std::size_t modes() const { return decay.size(); }
};

/// Mutable prediction state: the window of the d-1 most recent observations
/// (newest first, zero-filled until enough observations arrive) and one
/// geometrically discounted trace vector per decay mode.
struct MeanModelState {
  std::deque<std::vector<double>> window;   // size d-1, window[i] = x_{t-1-i}
  std::vector<std::vector<double>> trace;   // K vectors of size N
};

/// Fresh zeroed model. sigma defaults to 1 per dimension.
std::pair<MeanModelParams, MeanModelState> new_mean_model(std::size_t dim, std::size_t lag,
                                                          std::vector<double> decay);

/// How a scalar learning rate turns per-parameter gradients into updates:
/// plain constant-rate SGD, or AdaGrad-style normalization by the root of the
/// accumulated squared gradient.
enum class StepRule { sgd, adagrad };

/// Per-parameter squared-gradient accumulators for StepRule::adagrad, shaped
/// like the weights they accompany.
struct GradAccum {
  std::vector<double> bias;
  std::vector<Matrix> lag_weight;
  std::vector<Matrix> trace_weight;
};

GradAccum make_grad_accum(const MeanModelParams& params);

/// Applies one online update from a per-dimension score vector (the gradient
/// of the chosen log likelihood with respect to the prediction):
///   bias   <- step(score)
///   W[i]   <- step(score * window[i]^T)
///   U[k]   <- step(score * trace[k]^T)
/// Under StepRule::adagrad, `accum` must outlive the training run.
void apply_score_update(MeanModelParams& params, const MeanModelState& state,
                        std::span<const double> score, double lr, StepRule rule,
                        GradAccum* accum);

/// Zeroes the window and traces.
void reset_state(const MeanModelParams& params, MeanModelState& state);

/// One-step mean prediction:
///   mu = bias + sum_i lag_weight[i] * window[i] + sum_k trace_weight[k] * trace[k]
std::vector<double> predict_mean(const MeanModelParams& params, const MeanModelState& state);

/// Sum over dimensions of the Gaussian log density of x given (mu, sigma).
double gaussian_loglik(std::span<const double> x, std::span<const double> mu,
                       std::span<const double> sigma);

/// Stochastic-gradient ascent step on the Gaussian log likelihood of x_t.
/// With e = x_t - predict_mean() and g = e / sigma^2:
///   bias += lr*g, lag_weight[i] += lr*g*window[i]^T, trace_weight[k] += lr*g*trace[k]^T.
/// sigma is updated only when update_sigma is set (d/dsigma = -1/s + e^2/s^3).
/// Throws on a non-finite gradient, which signals divergence.
void mean_sgd_step(MeanModelParams& params, const MeanModelState& state,
                   std::span<const double> x_t, double lr, bool update_sigma = false);

/// Retires the oldest window entry into every trace (trace = decay*trace +
/// oldest) and pushes x_t in front.
void advance_state(const MeanModelParams& params, MeanModelState& state,
                   std::span<const double> x_t);

/// Prediction-only pass from a fresh zero state; returns one prediction per
/// time step.
std::vector<std::vector<double>> predict_series(const MeanModelParams& params,
                                                const SeriesFrame& series);

/// Online training: each epoch resets the state and sweeps the series with
/// predict / gradient step / advance. Parameters persist across epochs.
/// Returns the predictions of a final learning-free pass (empty when
/// epochs == 0, in which case parameters are untouched).
std::vector<std::vector<double>> train_online(MeanModelParams& params, MeanModelState& state,
                                              const SeriesFrame& series, int epochs, double lr,
                                              StepRule rule = StepRule::sgd);

}  // namespace dybm
