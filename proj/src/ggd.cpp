#include "dybm/ggd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dybm/special.hpp"

namespace dybm {

namespace {

constexpr double kLn2 = 0.6931471805599453;

void check_params(const GgdParams& p, const char* what) {
  if (!(p.rho > 0.0) || !std::isfinite(p.rho) || !(p.beta > 0.0) || !std::isfinite(p.beta)) {
    throw std::invalid_argument(std::string(what) + ": rho and beta must be positive and finite");
  }
}

double sign(double x) { return (x > 0.0) ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

double ggd_logpdf(double x, double mu, const GgdParams& p) {
  check_params(p, "ggd_logpdf");
  const double e = std::abs(x - mu);
  return 0.5 * std::log(p.beta) - kLn2 - std::lgamma(1.0 + 1.0 / p.rho) -
         std::pow(p.beta, 0.5 * p.rho) * std::pow(e, p.rho);
}

double ggd_grad_beta(double x, double mu, const GgdParams& p) {
  check_params(p, "ggd_grad_beta");
  const double e = std::max(std::abs(x - mu), kResidualFloor);
  return 0.5 / p.beta -
         0.5 * p.rho * std::pow(p.beta, 0.5 * p.rho - 1.0) * std::pow(e, p.rho);
}

double ggd_grad_rho(double x, double mu, const GgdParams& p) {
  check_params(p, "ggd_grad_rho");
  const double e = std::max(std::abs(x - mu), kResidualFloor);
  const double a = p.beta * e * e;
  return digamma(1.0 + 1.0 / p.rho) / (p.rho * p.rho) -
         0.5 * std::pow(a, 0.5 * p.rho) * std::log(a);
}

double ggd_grad_mu(double x, double mu, const GgdParams& p) {
  check_params(p, "ggd_grad_mu");
  const double e = std::max(std::abs(x - mu), kResidualFloor);
  return std::pow(p.beta, 0.5 * p.rho) * p.rho * sign(x - mu) * std::pow(e, p.rho - 1.0);
}

double mle_beta(std::span<const double> residuals, double rho) {
  if (residuals.empty()) throw std::invalid_argument("mle_beta: empty residuals");
  if (!(rho > 0.0)) throw std::invalid_argument("mle_beta: rho must be positive");
  bool live = false;
  double sum = 0.0;
  for (double r : residuals) {
    const double e = std::abs(r);
    if (e > kResidualFloor) live = true;
    sum += std::pow(std::max(e, kResidualFloor), rho);
  }
  if (!live) throw std::runtime_error("mle_beta: all residuals are (near) zero");
  const double t = static_cast<double>(residuals.size());
  return std::pow(t / (rho * sum), 2.0 / rho);
}

double moment_ratio_c(std::span<const double> residuals) {
  if (residuals.empty()) throw std::invalid_argument("moment_ratio_c: empty residuals");
  double abs_mean = 0.0;
  double sq_mean = 0.0;
  for (double r : residuals) {
    abs_mean += std::abs(r);
    sq_mean += r * r;
  }
  abs_mean /= static_cast<double>(residuals.size());
  sq_mean /= static_cast<double>(residuals.size());
  if (!(sq_mean > 0.0)) throw std::runtime_error("moment_ratio_c: all residuals are zero");
  return abs_mean * abs_mean / sq_mean;
}

double clamp_moment_ratio(double c) { return std::clamp(c, 1e-4, 0.75 - 1e-6); }

double ggd_moment_ratio(double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("ggd_moment_ratio: rho must be positive");
  return std::exp(2.0 * std::lgamma(2.0 / rho) - std::lgamma(1.0 / rho) -
                  std::lgamma(3.0 / rho));
}

double rho_from_c(double c) {
  if (!(c > 0.0 && c < 0.75)) {
    throw std::invalid_argument("rho_from_c: c must lie in (0, 0.75)");
  }
  double lo = kRhoMin;
  double hi = kRhoMax;
  if (c <= ggd_moment_ratio(lo)) return lo;
  if (c >= ggd_moment_ratio(hi)) return hi;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (ggd_moment_ratio(mid) < c) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double rho_from_c_fast(double c) {
  if (!(c > 0.0 && c < 0.131246)) {
    throw std::invalid_argument("rho_from_c_fast: valid only for c in (0, 0.131246)");
  }
  return 2.0 * std::log(27.0 / 16.0) / std::log(3.0 / (4.0 * c * c));
}

std::vector<double> sample_ggd(double mu, const GgdParams& p, std::size_t n, Rng& rng) {
  check_params(p, "sample_ggd");
  if (n < 1) throw std::invalid_argument("sample_ggd: n must be >= 1");
  const double inv_rho = 1.0 / p.rho;
  const double scale = 1.0 / std::sqrt(p.beta);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = rng.gamma(inv_rho);
    const double magnitude = std::pow(g, inv_rho) * scale;
    out.push_back(mu + (rng.coin() ? magnitude : -magnitude));
  }
  return out;
}

std::vector<double> sample_ggd(double mu, const GgdParams& p, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_ggd(mu, p, n, rng);
}

ResidualBuffer::ResidualBuffer(std::size_t period) : window_(period, 0.0) {
  if (period < 2) throw std::invalid_argument("ResidualBuffer: period must be >= 2");
}

void ResidualBuffer::push(double residual) {
  window_[next_] = residual;
  next_ = (next_ + 1) % window_.size();
  if (count_ < window_.size()) ++count_;
}

bool ResidualBuffer::degenerate() const {
  for (double r : window_) {
    if (std::abs(r) > kResidualFloor) return false;
  }
  return true;
}

GgdParams readjust_from_record(const GgdParams& current, std::span<const double> residuals,
                               ReadjustOrder order) {
  check_params(current, "readjust");
  const double c = clamp_moment_ratio(moment_ratio_c(residuals));
  GgdParams out;
  if (order == ReadjustOrder::shape_first) {
    out.rho = rho_from_c(c);
    out.beta = mle_beta(residuals, out.rho);
  } else {
    out.beta = mle_beta(residuals, current.rho);
    out.rho = rho_from_c(c);
  }
  return out;
}

GgdParams readjust(const GgdParams& p, const ResidualBuffer& buffer, ReadjustOrder order) {
  if (!buffer.full()) throw std::invalid_argument("readjust: residual window is not full");
  if (buffer.degenerate()) throw std::runtime_error("readjust: degenerate residual window");
  return readjust_from_record(p, buffer.window(), order);
}

GgdTrainResult ggd_train_online(MeanModelParams& params, MeanModelState& state,
                                std::vector<GgdParams> dist, const SeriesFrame& series,
                                int epochs, double lr, std::size_t readjust_period,
                                bool readjust_enabled, ReadjustOrder order, StepRule rule) {
  if (epochs < 0) throw std::invalid_argument("ggd_train_online: epochs must be >= 0");
  if (!(lr > 0.0)) throw std::invalid_argument("ggd_train_online: learning rate must be positive");
  if (readjust_period < 2) {
    throw std::invalid_argument("ggd_train_online: readjust_period must be >= 2");
  }
  if (series.size() < 1 || series.dim() != params.dim) {
    throw std::invalid_argument("ggd_train_online: series shape mismatch");
  }
  if (dist.size() != params.dim) {
    throw std::invalid_argument("ggd_train_online: one GgdParams per dimension required");
  }
  for (const GgdParams& p : dist) check_params(p, "ggd_train_online");

  GgdTrainResult result;
  if (epochs == 0) {
    result.dist = std::move(dist);
    return result;
  }

  std::vector<std::vector<double>> records(params.dim);
  for (auto& r : records) r.reserve(series.size() * static_cast<std::size_t>(epochs));
  std::vector<char> live(params.dim, 0);
  GradAccum accum = make_grad_accum(params);
  std::vector<double> grad(params.dim);
  std::size_t step_count = 0;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    reset_state(params, state);
    for (std::size_t t = 0; t < series.size(); ++t) {
      const std::vector<double> mu = predict_mean(params, state);
      for (std::size_t j = 0; j < params.dim; ++j) {
        if (!std::isfinite(mu[j])) {
          throw std::runtime_error("ggd_train_online: non-finite prediction (divergence)");
        }
        grad[j] = ggd_grad_mu(series.values[t][j], mu[j], dist[j]);
        const double residual = series.values[t][j] - mu[j];
        records[j].push_back(residual);
        if (std::abs(residual) > kResidualFloor) live[j] = 1;
      }

      apply_score_update(params, state, grad, lr, rule, &accum);

      ++step_count;
      if (readjust_enabled && step_count % readjust_period == 0) {
        for (std::size_t j = 0; j < params.dim; ++j) {
          if (live[j]) dist[j] = readjust_from_record(dist[j], records[j], order);
        }
      }
      advance_state(params, state, series.values[t]);
    }
  }

  // Learning-free pass; leaves `state` at the end of the series.
  reset_state(params, state);
  result.predictions.reserve(series.size());
  for (std::size_t t = 0; t < series.size(); ++t) {
    result.predictions.push_back(predict_mean(params, state));
    advance_state(params, state, series.values[t]);
  }
  result.dist = std::move(dist);
  return result;
}

}  // namespace dybm
