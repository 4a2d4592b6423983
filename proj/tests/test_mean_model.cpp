#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

#include "dybm/eval.hpp"
#include "dybm/mean_model.hpp"
#include "dybm/model_io.hpp"
#include "test_util.hpp"

using dybm::MeanModelParams;
using dybm::MeanModelState;
using dybm::SeriesFrame;

namespace {

SeriesFrame frame_of(const std::vector<double>& xs) { return dybm::series_from_values(xs); }

// Direct-sum trace oracle: after advancing with x_0..x_{M-1} the trace of a
// lag-d model is sum_{s=0}^{M-d} decay^{M-d-s} * x_s (zero history padding).
double trace_direct_sum(const std::vector<double>& xs, std::size_t advanced, std::size_t lag,
                        double decay) {
  double acc = 0.0;
  if (advanced + 1 < lag) return 0.0;
  for (std::size_t s = 0; s + lag <= advanced; ++s) {
    acc += std::pow(decay, static_cast<double>(advanced - lag - s)) * xs[s];
  }
  return acc;
}

}  // namespace

TEST_CASE("new_mean_model validates its arguments and starts at zero") {
  auto [params, state] = dybm::new_mean_model(1, 3, {0.5});
  CHECK(dybm::predict_mean(params, state)[0] == 0.0);
  CHECK(params.sigma[0] == 1.0);

  CHECK_THROWS(dybm::new_mean_model(1, 3, {1.0}));
  CHECK_THROWS(dybm::new_mean_model(1, 3, {0.0}));
  CHECK_THROWS(dybm::new_mean_model(1, 1, {0.5}));
  CHECK_THROWS(dybm::new_mean_model(0, 3, {0.5}));
  CHECK_THROWS(dybm::new_mean_model(1, 3, {}));

  // The full-scale configuration used by the stock-returns pipeline.
  CHECK_NOTHROW(dybm::new_mean_model(1, 66, {0.1, 0.9}));
}

TEST_CASE("predict_mean evaluates the linear form") {
  auto [params, state] = dybm::new_mean_model(1, 2, {0.5});
  params.bias[0] = 0.5;
  params.lag_weight[0](0, 0) = 0.2;
  params.trace_weight[0](0, 0) = 0.1;
  state.window[0] = {2.0};
  state.trace[0] = {3.0};
  CHECK(dybm::predict_mean(params, state)[0] == doctest::Approx(1.2).epsilon(1e-15));
}

TEST_CASE("with zero trace weights the model is a plain VAR") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> coef(-0.4, 0.4);
  std::uniform_real_distribution<double> val(-1.0, 1.0);

  const std::size_t n = 2;
  const std::size_t d = 4;
  auto [params, state] = dybm::new_mean_model(n, d, {0.7});
  for (std::size_t j = 0; j < n; ++j) params.bias[j] = coef(gen);
  for (auto& w : params.lag_weight) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) w(i, j) = coef(gen);
    }
  }

  std::vector<std::vector<double>> history;
  for (int t = 0; t < 30; ++t) {
    // VAR oracle straight from the raw history, zero-padded.
    std::vector<double> var_mu = params.bias;
    for (std::size_t i = 0; i + 1 < d; ++i) {
      const std::size_t back = i + 1;
      if (history.size() >= back) {
        params.lag_weight[i].add_matvec(history[history.size() - back], var_mu);
      }
    }
    const std::vector<double> mu = dybm::predict_mean(params, state);
    for (std::size_t j = 0; j < n; ++j) CHECK(mu[j] == var_mu[j]);  // bit identical

    std::vector<double> x{val(gen), val(gen)};
    dybm::advance_state(params, state, x);
    history.push_back(std::move(x));
  }
}

TEST_CASE("gaussian_loglik closed-form values") {
  const std::vector<double> zero{0.0};
  const std::vector<double> one{1.0};
  const std::vector<double> unit_sigma{1.0};
  CHECK(dybm::gaussian_loglik(zero, zero, unit_sigma) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-14));
  CHECK(dybm::gaussian_loglik(one, zero, unit_sigma) ==
        doctest::Approx(-0.9189385332046727 - 0.5).epsilon(1e-14));
  const std::vector<double> bad{-1.0};
  CHECK_THROWS(dybm::gaussian_loglik(zero, zero, bad));
}

TEST_CASE("gaussian density integrates to one") {
  const double mu = 0.3;
  const double sigma = 1.7;
  const auto density = [&](double x) {
    const std::vector<double> xs{x};
    const std::vector<double> mus{mu};
    const std::vector<double> sigmas{sigma};
    return std::exp(dybm::gaussian_loglik(xs, mus, sigmas));
  };
  const double integral = testutil::integrate(density, mu - 14.0 * sigma, mu + 14.0 * sigma, 1e-11);
  CHECK(std::abs(integral - 1.0) <= 1e-8);
}

TEST_CASE("trace recursion equals the direct sum") {
  SUBCASE("hand-checked short stream") {
    auto [params, state] = dybm::new_mean_model(1, 2, {0.5});
    const std::vector<double> expected{0.0, 1.0, 1.5};
    for (int t = 0; t < 3; ++t) {
      dybm::advance_state(params, state, std::vector<double>{1.0});
      CHECK(state.trace[0][0] == doctest::Approx(expected[t]).epsilon(1e-15));
    }
  }
  SUBCASE("all-zero stream stays at zero") {
    auto [params, state] = dybm::new_mean_model(1, 3, {0.9});
    for (int t = 0; t < 10; ++t) dybm::advance_state(params, state, std::vector<double>{0.0});
    CHECK(state.trace[0][0] == 0.0);
  }
  SUBCASE("random stream against brute force") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> val(-2.0, 2.0);
    const std::size_t d = 4;
    auto [params, state] = dybm::new_mean_model(1, d, {0.9, 0.3});
    std::vector<double> xs;
    for (int t = 0; t < 50; ++t) {
      xs.push_back(val(gen));
      dybm::advance_state(params, state, std::vector<double>{xs.back()});
      for (std::size_t k = 0; k < 2; ++k) {
        const double want = trace_direct_sum(xs, xs.size(), d, params.decay[k]);
        CHECK(std::abs(state.trace[k][0] - want) <= 1e-10);
      }
    }
  }
}

TEST_CASE("sgd step applies the analytic gradient") {
  auto [params, state] = dybm::new_mean_model(1, 2, {0.5});
  state.window[0] = {2.0};
  state.trace[0] = {0.0};
  // mu = 0, so x = 1 gives e = 1.
  dybm::mean_sgd_step(params, state, std::vector<double>{1.0}, 0.1);
  CHECK(params.bias[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(params.lag_weight[0](0, 0) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(params.trace_weight[0](0, 0) == 0.0);
}

TEST_CASE("zero error leaves parameters unchanged") {
  auto [params, state] = dybm::new_mean_model(1, 2, {0.5});
  params.bias[0] = 0.7;
  state.window[0] = {1.5};
  const double mu = dybm::predict_mean(params, state)[0];
  const MeanModelParams before = params;
  dybm::mean_sgd_step(params, state, std::vector<double>{mu}, 0.1);
  CHECK(params.bias == before.bias);
  CHECK(params.lag_weight[0] == before.lag_weight[0]);
}

TEST_CASE("analytic gradients match finite differences") {
  std::mt19937_64 gen(23);
  std::uniform_real_distribution<double> mag(0.3, 2.0);
  std::uniform_real_distribution<double> sig(0.5, 2.0);
  std::uniform_real_distribution<double> signdist(0.0, 1.0);
  auto signed_mag = [&]() { return (signdist(gen) < 0.5 ? -1.0 : 1.0) * mag(gen); };

  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 3;
    const std::size_t d = 2 + trial % 3;
    const std::size_t k = 1 + trial % 2;
    std::vector<double> decay;
    for (std::size_t i = 0; i < k; ++i) decay.push_back(0.2 + 0.5 * i / std::max<std::size_t>(k - 1, 1));
    auto [params, state] = dybm::new_mean_model(n, d, decay);
    for (std::size_t j = 0; j < n; ++j) {
      params.bias[j] = signed_mag();
      params.sigma[j] = sig(gen);
    }
    for (auto& w : params.lag_weight) {
      for (auto& v : w.data()) v = 0.3 * signed_mag();
    }
    for (auto& u : params.trace_weight) {
      for (auto& v : u.data()) v = 0.3 * signed_mag();
    }
    for (auto& row : state.window) {
      for (auto& v : row) v = signed_mag();
    }
    for (auto& row : state.trace) {
      for (auto& v : row) v = signed_mag();
    }

    std::vector<double> x(n);
    const std::vector<double> mu0 = dybm::predict_mean(params, state);
    for (std::size_t j = 0; j < n; ++j) x[j] = mu0[j] + signed_mag();

    const auto loglik = [&](const MeanModelParams& p) {
      return dybm::gaussian_loglik(x, dybm::predict_mean(p, state), p.sigma);
    };

    // Analytic gradients recovered from a tiny-rate step, checked against
    // central differences on every coordinate, including sigma.
    // The update is linear in lr, so a moderate rate recovers the gradient
    // without cancellation error.
    MeanModelParams stepped = params;
    const double lr = 1e-4;
    dybm::mean_sgd_step(stepped, state, x, lr, /*update_sigma=*/true);
    const double h = 1e-6;

    for (std::size_t j = 0; j < n; ++j) {
      const double analytic = (stepped.bias[j] - params.bias[j]) / lr;
      MeanModelParams plus = params;
      MeanModelParams minus = params;
      plus.bias[j] += h;
      minus.bias[j] -= h;
      const double fd = (loglik(plus) - loglik(minus)) / (2.0 * h);
      CHECK(testutil::rel_err(analytic, fd) < 1e-5);
    }
    for (std::size_t i = 0; i < params.lag_weight.size(); ++i) {
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
          const double analytic = (stepped.lag_weight[i](r, c) - params.lag_weight[i](r, c)) / lr;
          MeanModelParams plus = params;
          MeanModelParams minus = params;
          plus.lag_weight[i](r, c) += h;
          minus.lag_weight[i](r, c) -= h;
          const double fd = (loglik(plus) - loglik(minus)) / (2.0 * h);
          CHECK(testutil::rel_err(analytic, fd) < 1e-5);
        }
      }
    }
    for (std::size_t u = 0; u < params.trace_weight.size(); ++u) {
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
          const double analytic =
              (stepped.trace_weight[u](r, c) - params.trace_weight[u](r, c)) / lr;
          MeanModelParams plus = params;
          MeanModelParams minus = params;
          plus.trace_weight[u](r, c) += h;
          minus.trace_weight[u](r, c) -= h;
          const double fd = (loglik(plus) - loglik(minus)) / (2.0 * h);
          CHECK(testutil::rel_err(analytic, fd) < 1e-5);
        }
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double analytic = (stepped.sigma[j] - params.sigma[j]) / lr;
      MeanModelParams plus = params;
      MeanModelParams minus = params;
      plus.sigma[j] += h;
      minus.sigma[j] -= h;
      const double fd = (loglik(plus) - loglik(minus)) / (2.0 * h);
      CHECK(testutil::rel_err(analytic, fd) < 1e-5);
    }
  }
}

TEST_CASE("a small step increases the log likelihood") {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto [params, state] = dybm::new_mean_model(2, 3, {0.4});
    for (auto& row : state.window) {
      for (auto& v : row) v = val(gen);
    }
    std::vector<double> x{val(gen) + 0.5, val(gen) - 0.5};
    const double before = dybm::gaussian_loglik(x, dybm::predict_mean(params, state), params.sigma);
    dybm::mean_sgd_step(params, state, x, 1e-6);
    const double after = dybm::gaussian_loglik(x, dybm::predict_mean(params, state), params.sigma);
    CHECK(after > before);
  }
}

TEST_CASE("non-finite input is reported as divergence") {
  auto [params, state] = dybm::new_mean_model(1, 2, {0.5});
  CHECK_THROWS_AS(
      dybm::mean_sgd_step(params, state, std::vector<double>{std::nan("")}, 0.1),
      std::runtime_error);
}

TEST_CASE("train_online with zero epochs is a no-op") {
  auto [params, state] = dybm::new_mean_model(1, 2, {0.5});
  const auto preds = dybm::train_online(params, state, frame_of({1.0, 2.0, 3.0}), 0, 0.01);
  CHECK(preds.empty());
  CHECK(params.bias[0] == 0.0);
}

TEST_CASE("train_online fits a constant signal") {
  const double c = 1.0;
  const SeriesFrame series = frame_of(std::vector<double>(2000, c));
  auto [params, state] = dybm::new_mean_model(1, 2, {0.5});
  const auto preds = dybm::train_online(params, state, series, 200, 0.01);
  std::vector<double> flat;
  for (const auto& p : preds) flat.push_back(p[0]);
  double acc = 0.0;
  for (double p : flat) acc += (p - c) * (p - c);
  const double rmse = std::sqrt(acc / flat.size());
  CHECK(rmse < 0.01 * std::abs(c));
}

TEST_CASE("training is deterministic") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  std::vector<double> xs;
  for (int t = 0; t < 200; ++t) xs.push_back(val(gen));
  const SeriesFrame series = frame_of(xs);

  auto [p1, s1] = dybm::new_mean_model(1, 4, {0.2, 0.8});
  auto [p2, s2] = dybm::new_mean_model(1, 4, {0.2, 0.8});
  const auto preds1 = dybm::train_online(p1, s1, series, 3, 0.01);
  const auto preds2 = dybm::train_online(p2, s2, series, 3, 0.01);
  CHECK(preds1 == preds2);
  CHECK(p1.bias == p2.bias);
}

TEST_CASE("adaptive step rule trains deterministically and fits") {
  const SeriesFrame series = dybm::gen_ar_ggd_series(0.7, dybm::GgdParams{2.0, 0.5}, 2000, 13);

  auto [p1, s1] = dybm::new_mean_model(1, 4, {0.5});
  auto [p2, s2] = dybm::new_mean_model(1, 4, {0.5});
  const auto preds1 = dybm::train_online(p1, s1, series, 4, 0.05, dybm::StepRule::adagrad);
  const auto preds2 = dybm::train_online(p2, s2, series, 4, 0.05, dybm::StepRule::adagrad);
  CHECK(preds1 == preds2);

  // Fits the AR structure: beats the zero predictor clearly.
  std::vector<double> flat_pred;
  std::vector<double> flat_truth;
  for (std::size_t t = 0; t < series.size(); ++t) {
    flat_pred.push_back(preds1[t][0]);
    flat_truth.push_back(series.values[t][0]);
  }
  const std::vector<double> zeros(flat_truth.size(), 0.0);
  CHECK(dybm::rmse(flat_pred, flat_truth) < 0.85 * dybm::rmse(zeros, flat_truth));

  // A different rule takes a different trajectory.
  auto [p3, s3] = dybm::new_mean_model(1, 4, {0.5});
  dybm::train_online(p3, s3, series, 4, 0.05, dybm::StepRule::sgd);
  CHECK(p3.bias[0] != p1.bias[0]);
}

TEST_CASE("score updates require an accumulator under the adaptive rule") {
  auto [params, state] = dybm::new_mean_model(1, 2, {0.5});
  const std::vector<double> score{1.0};
  CHECK_THROWS_AS(
      dybm::apply_score_update(params, state, score, 0.01, dybm::StepRule::adagrad, nullptr),
      std::invalid_argument);
  dybm::GradAccum accum = dybm::make_grad_accum(params);
  CHECK_NOTHROW(
      dybm::apply_score_update(params, state, score, 0.01, dybm::StepRule::adagrad, &accum));
  CHECK(accum.bias[0] == 1.0);  // squared gradient recorded
}

TEST_CASE("full-scale configuration trains quickly") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> xs;
  for (int t = 0; t < 5591; ++t) xs.push_back(noise(gen));
  const SeriesFrame series = frame_of(xs);

  const auto start = std::chrono::steady_clock::now();
  auto [params, state] = dybm::new_mean_model(1, 66, {0.1, 0.9});
  dybm::train_online(params, state, series, 5, 0.01);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(elapsed < 10.0);
}

TEST_CASE("mean model JSON round-trips") {
  auto [params, state] = dybm::new_mean_model(2, 3, {0.25, 0.75});
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  for (auto& b : params.bias) b = val(gen);
  for (auto& w : params.lag_weight) {
    for (auto& v : w.data()) v = val(gen);
  }
  for (auto& u : params.trace_weight) {
    for (auto& v : u.data()) v = val(gen);
  }
  params.sigma = {0.9, 1.4};

  const auto doc = dybm::mean_model_to_json(params);
  const MeanModelParams back = dybm::mean_model_from_json(doc);
  CHECK(back.bias == params.bias);
  CHECK(back.sigma == params.sigma);
  CHECK(back.decay == params.decay);
  for (std::size_t i = 0; i < params.lag_weight.size(); ++i) {
    CHECK(back.lag_weight[i] == params.lag_weight[i]);
  }
  for (std::size_t k = 0; k < params.trace_weight.size(); ++k) {
    CHECK(back.trace_weight[k] == params.trace_weight[k]);
  }
}
