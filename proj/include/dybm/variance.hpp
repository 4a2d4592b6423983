#pragma once

#include <deque>
#include <optional>
#include <span>
#include <vector>

namespace dybm {

/// Variance predictor parameters: d nonnegative squared-error lag weights,
/// k nonnegative trace weights, their decay rates, and a nonnegative base
/// level. Nonnegativity keeps every predicted variance >= 0.
struct VarModelParams {
  double v0 = 0.0;
  std::vector<double> w;       // size d
  std::vector<double> u;       // size k
  std::vector<double> lambda;  // size k, each in (0,1)

  std::size_t lag() const { return w.size(); }
  std::size_t modes() const { return u.size(); }
};

void validate_var_params(const VarModelParams& params);

/// State: the d most recent squared errors (newest first) and one discounted
/// trace per mode holding everything older, with the newest trace element
/// carrying one factor of the decay.
struct VarModelState {
  std::deque<double> err2_window;  // size d, err2_window[i] = e^2_{t-1-i}
  std::vector<double> trace;       // size k
};

VarModelState make_var_state(const VarModelParams& params);

/// sigma^2_t = v0 + sum_i w[i]*e^2_{t-1-i} + sum_j u[j]*trace[j]
double predict_variance(const VarModelParams& params, const VarModelState& state);

/// Retires the oldest squared error into every trace (trace = lambda*(old +
/// trace)) and pushes e_t^2 in front.
void advance_var_state(VarModelState& state, double err, std::span<const double> lambda);

/// Variance path over an error sequence from a fresh zero state.
std::vector<double> dybm_sigma2_path(const VarModelParams& params,
                                     std::span<const double> errors);

/// GARCH(p,q): sigma^2_t = a0 + sum_i a[i]*e^2_{t-i} + sum_i b[i]*sigma^2_{t-i}.
struct GarchParams {
  double a0 = 0.0;
  std::vector<double> a;  // size p
  std::vector<double> b;  // size q

  std::size_t p() const { return a.size(); }
  std::size_t q() const { return b.size(); }
};

void validate_garch_params(const GarchParams& params);

/// a0 / (1 - a1 - b1); requires a stationary (1,1) model.
double garch_long_run_variance(const GarchParams& params);

/// The order-(1,1) parameter correspondence under which the two predictors
/// produce identical variance sequences: v0 = a0/(1-b1), w1 = u1 = a1,
/// lambda1 = b1. Requires 0 < b1 < 1 (b1 = 0 leaves no trace mode).
VarModelParams map_garch_to_dybm11(const GarchParams& params);

/// One-step prediction from explicit histories, newest first; histories
/// shorter than the model order are zero-padded.
double garch_predict(const GarchParams& params, std::span<const double> err2_recent,
                     std::span<const double> sigma2_recent);

/// Variance path over an error sequence. Element 0 is the initial variance:
/// the mean squared error of the sequence unless `sigma2_init` is given.
std::vector<double> garch_sigma2_path(const GarchParams& params, std::span<const double> errors,
                                      std::optional<double> sigma2_init = {});

/// n-step-ahead forecast for a stationary (1,1) model:
///   sigma^2_{t+n} = lrv + (a1+b1)^n * (sigma^2_t - lrv).
double garch_forecast_n(const GarchParams& params, double sigma2_t, long n);

/// Constants of the closed-form multi-step variance forecast for an order
/// (1,1) variance model. With beta = w1+lambda1 and gamma = lambda1*(u1-w1),
/// the forecast deviations follow a second-order linear recurrence whose
/// characteristic roots are r1, r2; c1 and c2 are fixed by the n=0 and n=1
/// boundary values.
struct ForecastConstants {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

/// Requires order (1,1), w1+lambda1 < 1, a finite long-run level
/// (beta+gamma < 1), and real distinct roots; throws otherwise, directing the
/// caller to the recursive forecaster which has no such restriction.
ForecastConstants forecast_constants(const VarModelParams& params, double sigma2_t,
                                     double e2_last);

/// sigma^2_{t+n} = alpha + c0 + c1*r1^n + c2*r2^n; n = 0 returns sigma^2_t.
double dybm_var_forecast_closed(const ForecastConstants& constants, long n);

/// Reference forecaster: iterates
///   sigma^2_{t+1} = v0*(1-lambda1) + beta*sigma^2_t + gamma*e^2_{t-1}
///   sigma^2_{t+N} = v0*(1-lambda1) + beta*sigma^2_{t+N-1} + gamma*sigma^2_{t+N-2}
/// (unobserved future squared errors replaced by their forecasts). Valid for
/// any roots.
double dybm_var_forecast_recursive(const VarModelParams& params, double sigma2_t, double e2_last,
                                   long n);

/// Batch fit of the variance predictor by projected gradient descent on
///   J(theta) = sum_t (sigma2_hat_t(theta) - e_t^2)^2 + l1_weight * ||theta||_1
/// with every coefficient clamped at zero. Decay rates are given and fixed.
/// `step` <= 0 selects 1/(2*Lmax) from the feature Gram matrix; the best
/// iterate by J is returned.
VarModelParams fit_variance_batch(std::span<const double> errors, std::size_t d, std::size_t k,
                                  std::vector<double> lambda, double l1_weight, int iters,
                                  double step = 0.0);

/// Gaussian quasi-maximum-likelihood fit of a (1,1) model: coarse grid over
/// (a1, b1) with a0 profiled to match the sample variance, refined by
/// deterministic coordinate pattern search. Requires at least 100 errors.
GarchParams fit_garch11_qmle(std::span<const double> errors);

}  // namespace dybm
