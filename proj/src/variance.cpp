#include "dybm/variance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dybm {

namespace {

double mean_square(std::span<const double> xs) {
  double acc = 0.0;
  for (double x : xs) acc += x * x;
  return acc / static_cast<double>(xs.size());
}

void require_order11(const VarModelParams& params, const char* what) {
  if (params.lag() != 1 || params.modes() != 1) {
    throw std::invalid_argument(std::string(what) + ": requires an order-(1,1) model");
  }
}

}  // namespace

void validate_var_params(const VarModelParams& params) {
  if (params.u.size() != params.lambda.size()) {
    throw std::invalid_argument("VarModelParams: one decay rate per trace mode required");
  }
  if (params.w.empty() || params.u.empty()) {
    throw std::invalid_argument("VarModelParams: need at least one lag and one trace mode");
  }
  if (!(params.v0 >= 0.0) || !std::isfinite(params.v0)) {
    throw std::invalid_argument("VarModelParams: v0 must be nonnegative");
  }
  for (double x : params.w) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw std::invalid_argument("VarModelParams: lag weights must be nonnegative");
    }
  }
  for (double x : params.u) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw std::invalid_argument("VarModelParams: trace weights must be nonnegative");
    }
  }
  for (double l : params.lambda) {
    if (!(l > 0.0 && l < 1.0)) {
      throw std::invalid_argument("VarModelParams: decay rates must lie in (0,1)");
    }
  }
}

VarModelState make_var_state(const VarModelParams& params) {
  VarModelState state;
  state.err2_window.assign(params.lag(), 0.0);
  state.trace.assign(params.modes(), 0.0);
  return state;
}

double predict_variance(const VarModelParams& params, const VarModelState& state) {
  if (state.err2_window.size() != params.lag() || state.trace.size() != params.modes()) {
    throw std::invalid_argument("predict_variance: state/parameter shape mismatch");
  }
  double s2 = params.v0;
  for (std::size_t i = 0; i < params.w.size(); ++i) s2 += params.w[i] * state.err2_window[i];
  for (std::size_t j = 0; j < params.u.size(); ++j) s2 += params.u[j] * state.trace[j];
  return s2;
}

void advance_var_state(VarModelState& state, double err, std::span<const double> lambda) {
  if (lambda.size() != state.trace.size()) {
    throw std::invalid_argument("advance_var_state: decay/trace size mismatch");
  }
  const double oldest = state.err2_window.back();
  state.err2_window.pop_back();
  for (std::size_t j = 0; j < state.trace.size(); ++j) {
    state.trace[j] = lambda[j] * (oldest + state.trace[j]);
  }
  state.err2_window.push_front(err * err);
}

std::vector<double> dybm_sigma2_path(const VarModelParams& params,
                                     std::span<const double> errors) {
  validate_var_params(params);
  VarModelState state = make_var_state(params);
  std::vector<double> out;
  out.reserve(errors.size());
  for (double e : errors) {
    out.push_back(predict_variance(params, state));
    advance_var_state(state, e, params.lambda);
  }
  return out;
}

void validate_garch_params(const GarchParams& params) {
  if (params.a.empty() || params.b.empty()) {
    throw std::invalid_argument("GarchParams: need orders p >= 1 and q >= 1");
  }
  if (!(params.a0 >= 0.0) || !std::isfinite(params.a0)) {
    throw std::invalid_argument("GarchParams: a0 must be nonnegative");
  }
  for (double x : params.a) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw std::invalid_argument("GarchParams: error weights must be nonnegative");
    }
  }
  for (double x : params.b) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw std::invalid_argument("GarchParams: variance weights must be nonnegative");
    }
  }
}

double garch_long_run_variance(const GarchParams& params) {
  validate_garch_params(params);
  if (params.p() != 1 || params.q() != 1) {
    throw std::invalid_argument("garch_long_run_variance: requires a (1,1) model");
  }
  const double persistence = params.a[0] + params.b[0];
  if (!(persistence < 1.0)) {
    throw std::invalid_argument("garch_long_run_variance: nonstationary (a1 + b1 >= 1)");
  }
  return params.a0 / (1.0 - persistence);
}

VarModelParams map_garch_to_dybm11(const GarchParams& params) {
  validate_garch_params(params);
  if (params.p() != 1 || params.q() != 1) {
    throw std::invalid_argument("map_garch_to_dybm11: requires a (1,1) model");
  }
  const double b1 = params.b[0];
  if (!(b1 > 0.0 && b1 < 1.0)) {
    throw std::invalid_argument(
        "map_garch_to_dybm11: requires 0 < b1 < 1 (b1 = 0 has no trace mode)");
  }
  VarModelParams out;
  out.v0 = params.a0 / (1.0 - b1);
  out.w = {params.a[0]};
  out.u = {params.a[0]};
  out.lambda = {b1};
  return out;
}

double garch_predict(const GarchParams& params, std::span<const double> err2_recent,
                     std::span<const double> sigma2_recent) {
  validate_garch_params(params);
  double s2 = params.a0;
  for (std::size_t i = 0; i < params.a.size(); ++i) {
    s2 += params.a[i] * (i < err2_recent.size() ? err2_recent[i] : 0.0);
  }
  for (std::size_t i = 0; i < params.b.size(); ++i) {
    s2 += params.b[i] * (i < sigma2_recent.size() ? sigma2_recent[i] : 0.0);
  }
  return s2;
}

std::vector<double> garch_sigma2_path(const GarchParams& params, std::span<const double> errors,
                                      std::optional<double> sigma2_init) {
  validate_garch_params(params);
  if (errors.empty()) throw std::invalid_argument("garch_sigma2_path: empty error sequence");
  const double init = sigma2_init.value_or(mean_square(errors));
  std::vector<double> out(errors.size());
  out[0] = init;
  for (std::size_t t = 1; t < errors.size(); ++t) {
    double s2 = params.a0;
    for (std::size_t i = 0; i < params.a.size(); ++i) {
      const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(t) - 1 - static_cast<std::ptrdiff_t>(i);
      s2 += params.a[i] * (idx >= 0 ? errors[idx] * errors[idx] : 0.0);
    }
    for (std::size_t i = 0; i < params.b.size(); ++i) {
      const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(t) - 1 - static_cast<std::ptrdiff_t>(i);
      s2 += params.b[i] * (idx >= 0 ? out[idx] : init);
    }
    out[t] = s2;
  }
  return out;
}

double garch_forecast_n(const GarchParams& params, double sigma2_t, long n) {
  if (n < 0) throw std::invalid_argument("garch_forecast_n: n must be >= 0");
  const double lrv = garch_long_run_variance(params);
  if (n == 0) return sigma2_t;
  const double persistence = params.a[0] + params.b[0];
  return lrv + std::pow(persistence, static_cast<double>(n)) * (sigma2_t - lrv);
}

ForecastConstants forecast_constants(const VarModelParams& params, double sigma2_t,
                                     double e2_last) {
  validate_var_params(params);
  require_order11(params, "forecast_constants");
  if (!(sigma2_t >= 0.0) || !(e2_last >= 0.0)) {
    throw std::invalid_argument("forecast_constants: sigma2_t and e2_last must be nonnegative");
  }
  const double w1 = params.w[0];
  const double u1 = params.u[0];
  const double l1 = params.lambda[0];

  ForecastConstants c;
  c.beta = w1 + l1;
  c.gamma = l1 * (u1 - w1);
  if (!(c.beta < 1.0)) {
    throw std::invalid_argument("forecast_constants: requires w1 + lambda1 < 1");
  }
  if (!(c.beta + c.gamma < 1.0)) {
    throw std::invalid_argument("forecast_constants: no finite long-run level (beta+gamma >= 1)");
  }
  c.alpha = params.v0 * (1.0 - l1) / (1.0 - c.beta);

  const double s_t = sigma2_t - c.alpha;
  if (c.gamma == 0.0) {
    // u1 == w1: the recurrence is first order. r2 and c2 vanish identically
    // and the remaining constants are exact.
    c.r1 = c.beta;
    c.r2 = 0.0;
    c.c0 = 0.0;
    c.c1 = s_t;
    c.c2 = 0.0;
    return c;
  }

  const double disc = c.beta * c.beta + 4.0 * c.gamma;
  if (disc < 0.0) {
    throw std::runtime_error(
        "forecast_constants: complex roots; use dybm_var_forecast_recursive");
  }
  const double root = std::sqrt(disc);
  c.r1 = 0.5 * (c.beta + root);
  c.r2 = 0.5 * (c.beta - root);
  if (c.r1 == c.r2) {
    throw std::runtime_error(
        "forecast_constants: repeated root; use dybm_var_forecast_recursive");
  }
  c.c0 = c.gamma * c.alpha / (1.0 - c.beta - c.gamma);
  const double shifted = s_t - c.c0;
  const double bias = c.c0 * (1.0 - c.beta);
  c.c1 = (c.gamma * e2_last + c.r1 * shifted - bias) / (c.r1 - c.r2);
  c.c2 = -(c.gamma * e2_last + c.r2 * shifted - bias) / (c.r1 - c.r2);
  return c;
}

double dybm_var_forecast_closed(const ForecastConstants& constants, long n) {
  if (n < 0) throw std::invalid_argument("dybm_var_forecast_closed: n must be >= 0");
  if (n == 0) return constants.alpha + constants.c0 + constants.c1 + constants.c2;
  double value = constants.alpha + constants.c0 +
                 constants.c1 * std::pow(constants.r1, static_cast<double>(n));
  if (constants.c2 != 0.0) {
    value += constants.c2 * std::pow(constants.r2, static_cast<double>(n));
  }
  return value;
}

double dybm_var_forecast_recursive(const VarModelParams& params, double sigma2_t, double e2_last,
                                   long n) {
  validate_var_params(params);
  require_order11(params, "dybm_var_forecast_recursive");
  if (n < 0) throw std::invalid_argument("dybm_var_forecast_recursive: n must be >= 0");
  if (n == 0) return sigma2_t;
  const double w1 = params.w[0];
  const double u1 = params.u[0];
  const double l1 = params.lambda[0];
  const double base = params.v0 * (1.0 - l1);
  const double beta = w1 + l1;
  const double gamma = l1 * (u1 - w1);

  double prev2 = sigma2_t;                            // sigma^2_{t+N-2}
  double prev1 = base + beta * sigma2_t + gamma * e2_last;  // sigma^2_{t+1}
  for (long step = 2; step <= n; ++step) {
    const double next = base + beta * prev1 + gamma * prev2;
    prev2 = prev1;
    prev1 = next;
  }
  return prev1;
}

VarModelParams fit_variance_batch(std::span<const double> errors, std::size_t d, std::size_t k,
                                  std::vector<double> lambda, double l1_weight, int iters,
                                  double step) {
  if (d < 1 || k < 1) throw std::invalid_argument("fit_variance_batch: need d >= 1 and k >= 1");
  if (lambda.size() != k) {
    throw std::invalid_argument("fit_variance_batch: one decay rate per trace mode required");
  }
  for (double l : lambda) {
    if (!(l > 0.0 && l < 1.0)) {
      throw std::invalid_argument("fit_variance_batch: decay rates must lie in (0,1)");
    }
  }
  if (errors.size() <= d + 10) {
    throw std::invalid_argument("fit_variance_batch: need more than d + 10 errors");
  }
  if (!(l1_weight >= 0.0)) throw std::invalid_argument("fit_variance_batch: l1_weight must be >= 0");
  if (iters < 1) throw std::invalid_argument("fit_variance_batch: iters must be >= 1");

  // The predictor is linear in (v0, w, u) once the decay rates are fixed, so
  // build the feature matrix by running the state recursion over the errors.
  const std::size_t n = errors.size();
  const std::size_t p = 1 + d + k;
  std::vector<double> features(n * p);
  std::vector<double> targets(n);
  {
    VarModelParams shape;
    shape.v0 = 0.0;
    shape.w.assign(d, 0.0);
    shape.u.assign(k, 0.0);
    shape.lambda = lambda;
    VarModelState state = make_var_state(shape);
    for (std::size_t t = 0; t < n; ++t) {
      double* row = features.data() + t * p;
      row[0] = 1.0;
      for (std::size_t i = 0; i < d; ++i) row[1 + i] = state.err2_window[i];
      for (std::size_t j = 0; j < k; ++j) row[1 + d + j] = state.trace[j];
      targets[t] = errors[t] * errors[t];
      advance_var_state(state, errors[t], lambda);
    }
  }

  // Gram matrix and moment vector make every full-batch iteration O(p^2).
  std::vector<double> gram(p * p, 0.0);
  std::vector<double> moment(p, 0.0);
  double target_sq = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double* row = features.data() + t * p;
    for (std::size_t i = 0; i < p; ++i) {
      moment[i] += row[i] * targets[t];
      for (std::size_t j = i; j < p; ++j) gram[i * p + j] += row[i] * row[j];
    }
    target_sq += targets[t] * targets[t];
  }
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < i; ++j) gram[i * p + j] = gram[j * p + i];
  }

  const auto objective = [&](const std::vector<double>& theta) {
    double quad = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      double gi = 0.0;
      for (std::size_t j = 0; j < p; ++j) gi += gram[i * p + j] * theta[j];
      quad += theta[i] * (gi - 2.0 * moment[i]);
    }
    double l1 = 0.0;
    for (double x : theta) l1 += x;  // theta >= 0 after projection
    return quad + target_sq + l1_weight * l1;
  };

  if (!(step > 0.0)) {
    // Power iteration for the top Gram eigenvalue; the least-squares gradient
    // is 2*Gram, so 1/(2*lmax) is a safe fixed step.
    std::vector<double> v(p, 1.0 / std::sqrt(static_cast<double>(p)));
    std::vector<double> gv(p);
    double lmax = 0.0;
    for (int it = 0; it < 100; ++it) {
      for (std::size_t i = 0; i < p; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < p; ++j) acc += gram[i * p + j] * v[j];
        gv[i] = acc;
      }
      double norm = 0.0;
      for (double x : gv) norm += x * x;
      norm = std::sqrt(norm);
      if (!(norm > 0.0)) break;
      lmax = norm;
      for (std::size_t i = 0; i < p; ++i) v[i] = gv[i] / norm;
    }
    if (!(lmax > 0.0) || !std::isfinite(lmax)) {
      throw std::runtime_error("fit_variance_batch: degenerate feature matrix");
    }
    step = 0.5 / lmax;
  }

  std::vector<double> theta(p, 0.0);
  std::vector<double> best = theta;
  double best_j = objective(theta);
  if (!std::isfinite(best_j)) throw std::runtime_error("fit_variance_batch: divergence");

  std::vector<double> grad(p);
  for (int it = 0; it < iters; ++it) {
    for (std::size_t i = 0; i < p; ++i) {
      double gi = 0.0;
      for (std::size_t j = 0; j < p; ++j) gi += gram[i * p + j] * theta[j];
      grad[i] = 2.0 * (gi - moment[i]) + l1_weight;
    }
    for (std::size_t i = 0; i < p; ++i) {
      theta[i] = std::max(0.0, theta[i] - step * grad[i]);
    }
    const double j_now = objective(theta);
    if (!std::isfinite(j_now)) throw std::runtime_error("fit_variance_batch: divergence");
    if (j_now < best_j) {
      best_j = j_now;
      best = theta;
    }
  }

  VarModelParams out;
  out.v0 = best[0];
  out.w.assign(best.begin() + 1, best.begin() + 1 + d);
  out.u.assign(best.begin() + 1 + d, best.end());
  out.lambda = std::move(lambda);
  return out;
}

GarchParams fit_garch11_qmle(std::span<const double> errors) {
  if (errors.size() < 100) {
    throw std::invalid_argument("fit_garch11_qmle: need at least 100 errors");
  }
  const double sample_var = mean_square(errors);
  if (!(sample_var > 0.0) || !std::isfinite(sample_var)) {
    throw std::invalid_argument("fit_garch11_qmle: degenerate error sequence");
  }

  const auto quasi_loglik = [&](double a0, double a1, double b1) {
    double s2 = sample_var;
    double ll = 0.0;
    for (std::size_t t = 0; t < errors.size(); ++t) {
      if (t > 0) s2 = a0 + a1 * errors[t - 1] * errors[t - 1] + b1 * s2;
      const double floored = std::max(s2, 1e-12);
      ll += -0.5 * (std::log(floored) + errors[t] * errors[t] / floored);
    }
    return ll;
  };

  // Coarse grid, a0 profiled so the implied long-run variance matches the
  // sample variance.
  double best_a0 = sample_var;
  double best_a1 = 0.0;
  double best_b1 = 0.0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int ia = 0; ia <= 20; ++ia) {
    const double a1 = 0.02 * ia;
    for (int ib = 0; ib <= 49; ++ib) {
      const double b1 = 0.02 * ib;
      if (a1 + b1 > 0.999) continue;
      const double a0 = std::max(sample_var * (1.0 - a1 - b1), 1e-12);
      const double ll = quasi_loglik(a0, a1, b1);
      if (ll > best_ll) {
        best_ll = ll;
        best_a0 = a0;
        best_a1 = a1;
        best_b1 = b1;
      }
    }
  }

  // Deterministic coordinate pattern search around the grid optimum.
  double steps[3] = {0.25 * sample_var, 0.02, 0.02};
  const double min_step = 1e-9;
  for (int sweep = 0; sweep < 400; ++sweep) {
    bool any_live = false;
    for (int coord = 0; coord < 3; ++coord) {
      if (steps[coord] < min_step) continue;
      any_live = true;
      bool improved = false;
      for (double direction : {+1.0, -1.0}) {
        double a0 = best_a0;
        double a1 = best_a1;
        double b1 = best_b1;
        (coord == 0 ? a0 : coord == 1 ? a1 : b1) += direction * steps[coord];
        if (!(a0 >= 1e-12) || a1 < 0.0 || b1 < 0.0 || a1 + b1 > 0.999) continue;
        const double ll = quasi_loglik(a0, a1, b1);
        if (ll > best_ll) {
          best_ll = ll;
          best_a0 = a0;
          best_a1 = a1;
          best_b1 = b1;
          improved = true;
          break;
        }
      }
      if (!improved) steps[coord] *= 0.5;
    }
    if (!any_live) break;
  }

  GarchParams out;
  out.a0 = best_a0;
  out.a = {best_a1};
  out.b = {best_b1};
  return out;
}

}  // namespace dybm
