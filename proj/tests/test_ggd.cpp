#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"

#include "dybm/eval.hpp"
#include "dybm/ggd.hpp"
#include "dybm/mean_model.hpp"
#include "test_util.hpp"

using dybm::GgdParams;

namespace {

double ggd_density_integral(double mu, const GgdParams& p) {
  // Integration range chosen so the analytic tail mass is ~exp(-45); the
  // default +-12/sqrt(beta) window is too narrow for heavy tails.
  const double reach = std::max(12.0, std::pow(45.0, 1.0 / p.rho)) / std::sqrt(p.beta);
  const auto density = [&](double x) { return std::exp(dybm::ggd_logpdf(x, mu, p)); };
  // Split at mu: the density has a cusp there for rho < 1.
  return testutil::integrate(density, mu - reach, mu, 5e-10) +
         testutil::integrate(density, mu, mu + reach, 5e-10);
}

}  // namespace

TEST_CASE("logpdf reduces to the Gaussian at rho = 2") {
  const double x = 0.7;
  const double mu = 0.2;
  const double sigma = 1.3;
  const GgdParams p{2.0, 1.0 / (2.0 * sigma * sigma)};
  const std::vector<double> xs{x};
  const std::vector<double> mus{mu};
  const std::vector<double> sigmas{sigma};
  CHECK(std::abs(dybm::ggd_logpdf(x, mu, p) - dybm::gaussian_loglik(xs, mus, sigmas)) <= 1e-12);
}

TEST_CASE("density integrates to one") {
  for (const GgdParams& p : {GgdParams{0.9, 0.8}, GgdParams{2.0, 0.5}, GgdParams{4.0, 2.0}}) {
    CHECK(std::abs(ggd_density_integral(0.4, p) - 1.0) <= 1e-6);
  }
}

TEST_CASE("logpdf peak value at zero residual") {
  const GgdParams p{1.7, 2.3};
  const double want = 0.5 * std::log(p.beta) - std::log(2.0) - std::lgamma(1.0 + 1.0 / p.rho);
  CHECK(dybm::ggd_logpdf(5.0, 5.0, p) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("location score reduces to the Gaussian score at rho = 2") {
  const GgdParams p{2.0, 0.5};
  CHECK(dybm::ggd_grad_mu(1.0, 0.0, p) == doctest::Approx(1.0).epsilon(1e-14));
  // 2*beta*(x-mu) at a few points, matches 1e-12
  for (double e : {-1.7, -0.3, 0.4, 2.2}) {
    CHECK(std::abs(dybm::ggd_grad_mu(e, 0.0, p) - 2.0 * p.beta * e) <= 1e-12);
  }
}

TEST_CASE("scores match finite differences of the log density") {
  SUBCASE("the quoted spot check") {
    const GgdParams p{1.4, 0.9};
    const double x = 0.37;
    const double fd_beta = testutil::central_diff(
        [&](double b) { return dybm::ggd_logpdf(x, 0.0, GgdParams{p.rho, b}); }, p.beta);
    const double fd_rho = testutil::central_diff(
        [&](double r) { return dybm::ggd_logpdf(x, 0.0, GgdParams{r, p.beta}); }, p.rho);
    const double fd_mu = testutil::central_diff(
        [&](double m) { return dybm::ggd_logpdf(x, m, p); }, 0.0);
    CHECK(testutil::rel_err(dybm::ggd_grad_beta(x, 0.0, p), fd_beta) < 1e-5);
    CHECK(testutil::rel_err(dybm::ggd_grad_rho(x, 0.0, p), fd_rho) < 1e-5);
    CHECK(testutil::rel_err(dybm::ggd_grad_mu(x, 0.0, p), fd_mu) < 1e-5);
  }
  SUBCASE("randomized sweep") {
    std::mt19937_64 gen(41);
    std::uniform_real_distribution<double> rho_dist(0.5, 5.0);
    std::uniform_real_distribution<double> beta_dist(0.2, 4.0);
    std::uniform_real_distribution<double> err_dist(1e-3, 3.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
      const GgdParams p{rho_dist(gen), beta_dist(gen)};
      const double x = (u01(gen) < 0.5 ? -1.0 : 1.0) * err_dist(gen);
      const double fd_beta = testutil::central_diff(
          [&](double b) { return dybm::ggd_logpdf(x, 0.0, GgdParams{p.rho, b}); }, p.beta);
      const double fd_rho = testutil::central_diff(
          [&](double r) { return dybm::ggd_logpdf(x, 0.0, GgdParams{r, p.beta}); }, p.rho);
      const double fd_mu =
          testutil::central_diff([&](double m) { return dybm::ggd_logpdf(x, m, p); }, 0.0);
      CHECK(testutil::rel_err(dybm::ggd_grad_beta(x, 0.0, p), fd_beta) < 1e-5);
      CHECK(testutil::rel_err(dybm::ggd_grad_rho(x, 0.0, p), fd_rho) < 1e-5);
      CHECK(testutil::rel_err(dybm::ggd_grad_mu(x, 0.0, p), fd_mu) < 1e-5);
    }
  }
}

TEST_CASE("mle_beta closed form") {
  SUBCASE("unit residuals at rho = 2 give beta = 1/2") {
    const std::vector<double> res(50, 1.0);
    CHECK(dybm::mle_beta(res, 2.0) == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("single residual zeroes the scale score") {
    const std::vector<double> res{0.5};
    const double rho = 1.5;
    const double beta = dybm::mle_beta(res, rho);
    const double want = std::pow(1.0 / (rho * std::pow(0.5, rho)), 2.0 / rho);
    CHECK(beta == doctest::Approx(want).epsilon(1e-14));
    CHECK(std::abs(dybm::ggd_grad_beta(0.5, 0.0, GgdParams{rho, beta})) <= 1e-14);
  }
  SUBCASE("score sums to zero over a window") {
    std::mt19937_64 gen(2);
    std::normal_distribution<double> noise(0.0, 1.4);
    std::vector<double> res;
    for (int i = 0; i < 500; ++i) res.push_back(noise(gen));
    for (double rho : {0.8, 1.0, 2.0, 3.5}) {
      const double beta = dybm::mle_beta(res, rho);
      double acc = 0.0;
      for (double r : res) acc += dybm::ggd_grad_beta(r, 0.0, GgdParams{rho, beta});
      CHECK(std::abs(acc / res.size()) < 1e-8);
    }
  }
  SUBCASE("recovers the sampler's scale") {
    const auto draws = dybm::sample_ggd(0.0, GgdParams{1.0, 2.0}, 20000, 0);
    const double beta = dybm::mle_beta(draws, 1.0);
    CHECK(beta > 1.8);
    CHECK(beta < 2.2);
  }
  SUBCASE("error paths") {
    CHECK_THROWS(dybm::mle_beta(std::vector<double>{}, 1.0));
    CHECK_THROWS(dybm::mle_beta(std::vector<double>(5, 0.0), 1.0));
  }
}

TEST_CASE("moment ratio") {
  CHECK(dybm::moment_ratio_c(std::vector<double>{1.0, -1.0}) == doctest::Approx(1.0));
  CHECK(dybm::moment_ratio_c(std::vector<double>{1.0, 0.0}) == doctest::Approx(0.5));
  CHECK_THROWS(dybm::moment_ratio_c(std::vector<double>(4, 0.0)));
  CHECK_THROWS(dybm::moment_ratio_c(std::vector<double>{}));

  // Standard normal population value is 2/pi.
  std::mt19937_64 gen(8);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> draws;
  for (int i = 0; i < 50000; ++i) draws.push_back(noise(gen));
  CHECK(std::abs(dybm::moment_ratio_c(draws) - 2.0 / std::numbers::pi) <= 0.01);
}

TEST_CASE("population moment ratio is strictly increasing") {
  double prev = dybm::ggd_moment_ratio(dybm::kRhoMin);
  for (int i = 1; i <= 1000; ++i) {
    const double rho = dybm::kRhoMin + (dybm::kRhoMax - dybm::kRhoMin) * i / 1000.0;
    const double c = dybm::ggd_moment_ratio(rho);
    CHECK(c > prev);
    prev = c;
  }
  CHECK(prev < 0.75);
}

TEST_CASE("rho_from_c analytic anchors and inversion") {
  CHECK(std::abs(dybm::rho_from_c(0.5) - 1.0) <= 1e-8);
  CHECK(std::abs(dybm::rho_from_c(2.0 / std::numbers::pi) - 2.0) <= 1e-8);
  CHECK(dybm::rho_from_c(0.7499) > 15.0);  // uniform limit clamps high

  for (double rho : {0.15, 0.4, 0.9, 1.7, 3.0, 8.0, 19.0}) {
    CHECK(std::abs(dybm::rho_from_c(dybm::ggd_moment_ratio(rho)) - rho) <= 1e-8);
  }

  CHECK_THROWS(dybm::rho_from_c(0.0));
  CHECK_THROWS(dybm::rho_from_c(0.75));
  CHECK_THROWS(dybm::rho_from_c(-0.1));
  CHECK_THROWS(dybm::rho_from_c(1.0));

  CHECK(dybm::clamp_moment_ratio(1.0) == doctest::Approx(0.75 - 1e-6));
  CHECK(dybm::clamp_moment_ratio(0.0) == doctest::Approx(1e-4));
  CHECK(dybm::clamp_moment_ratio(0.3) == 0.3);
}

TEST_CASE("log-ratio fast path stays within 15% of the exact inversion") {
  // Compared on the part of its domain where the exact inversion is interior;
  // below c(kRhoMin) ~ 0.0046 the canonical estimator clamps to kRhoMin.
  const double c_lo = dybm::ggd_moment_ratio(dybm::kRhoMin) + 1e-4;
  for (int i = 0; i <= 200; ++i) {
    const double c = c_lo + (0.1312 - c_lo) * i / 200.0;
    const double fast = dybm::rho_from_c_fast(c);
    const double exact = dybm::rho_from_c(c);
    CHECK(std::abs(fast - exact) / exact <= 0.15);
  }
  CHECK_THROWS(dybm::rho_from_c_fast(0.2));
}

TEST_CASE("sampler moments and determinism") {
  SUBCASE("gaussian case moments") {
    const auto draws = dybm::sample_ggd(0.3, GgdParams{2.0, 0.5}, 100000, 1);
    double mean = 0.0;
    for (double x : draws) mean += x;
    mean /= draws.size();
    double var = 0.0;
    for (double x : draws) var += (x - mean) * (x - mean);
    var /= draws.size();
    CHECK(std::abs(mean - 0.3) <= 0.02);
    CHECK(var > 0.97);
    CHECK(var < 1.03);
  }
  SUBCASE("laplacian case moment ratio") {
    auto draws = dybm::sample_ggd(0.0, GgdParams{1.0, 2.0}, 100000, 2);
    CHECK(std::abs(dybm::moment_ratio_c(draws) - 0.5) <= 0.01);
  }
  SUBCASE("same seed, same stream") {
    const auto a = dybm::sample_ggd(0.0, GgdParams{1.3, 0.7}, 500, 42);
    const auto b = dybm::sample_ggd(0.0, GgdParams{1.3, 0.7}, 500, 42);
    CHECK(a == b);
  }
}

TEST_CASE("readjust recovers the generating shape") {
  SUBCASE("gaussian residuals") {
    std::mt19937_64 gen(4);
    std::normal_distribution<double> noise(0.0, 1.0);
    dybm::ResidualBuffer buffer(1000);
    for (int i = 0; i < 1000; ++i) buffer.push(noise(gen));
    const GgdParams out = dybm::readjust(GgdParams{1.0, 1.0}, buffer);
    CHECK(std::abs(out.rho - 2.0) <= 0.2);
    CHECK(std::abs(out.beta - 0.5) <= 0.05);
  }
  SUBCASE("laplacian residuals") {
    dybm::Rng rng(13);
    dybm::ResidualBuffer buffer(1000);
    const auto draws = dybm::sample_ggd(0.0, GgdParams{1.0, 2.0}, 1000, rng);
    for (double x : draws) buffer.push(x);
    const GgdParams out = dybm::readjust(GgdParams{2.0, 0.5}, buffer);
    CHECK(std::abs(out.rho - 1.0) <= 0.15);
  }
  SUBCASE("all-equal residuals clamp to the uniform end") {
    dybm::ResidualBuffer buffer(100);
    for (int i = 0; i < 100; ++i) buffer.push(0.7);
    const GgdParams out = dybm::readjust(GgdParams{2.0, 0.5}, buffer);
    CHECK(out.rho == doctest::Approx(dybm::kRhoMax));
  }
  SUBCASE("scale-first order uses the old shape for beta") {
    dybm::ResidualBuffer buffer(400);
    const auto draws = dybm::sample_ggd(0.0, GgdParams{1.0, 1.0}, 400, 5);
    for (double x : draws) buffer.push(x);
    const GgdParams old{3.0, 0.5};
    const GgdParams shape_first = dybm::readjust(old, buffer, dybm::ReadjustOrder::shape_first);
    const GgdParams scale_first = dybm::readjust(old, buffer, dybm::ReadjustOrder::scale_first);
    CHECK(shape_first.rho == doctest::Approx(scale_first.rho));  // same window, same c
    CHECK(scale_first.beta ==
          doctest::Approx(dybm::mle_beta(buffer.window(), old.rho)).epsilon(1e-12));
    CHECK(shape_first.beta ==
          doctest::Approx(dybm::mle_beta(buffer.window(), shape_first.rho)).epsilon(1e-12));
  }
  SUBCASE("error paths") {
    dybm::ResidualBuffer part(10);
    part.push(1.0);
    CHECK_THROWS(dybm::readjust(GgdParams{2.0, 0.5}, part));
    dybm::ResidualBuffer degenerate(4);
    for (int i = 0; i < 4; ++i) degenerate.push(0.0);
    CHECK_THROWS(dybm::readjust(GgdParams{2.0, 0.5}, degenerate));
  }
}

TEST_CASE("moment estimator is consistent across shapes") {
  for (double rho_true : {0.7, 1.0, 1.5, 2.0, 3.0}) {
    const std::size_t n = 20000;
    const auto draws = dybm::sample_ggd(0.0, GgdParams{rho_true, 1.0}, n, 0);
    dybm::ResidualBuffer buffer(n);
    for (double x : draws) buffer.push(x);
    const GgdParams out = dybm::readjust(GgdParams{2.0, 0.5}, buffer);
    CHECK(std::abs(out.rho - rho_true) <= 0.1 * rho_true);
  }
}

TEST_CASE("generalized training reduces to Gaussian training at rho = 2") {
  std::mt19937_64 gen(19);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> xs;
  for (int t = 0; t < 120; ++t) xs.push_back(noise(gen));
  const dybm::SeriesFrame series = dybm::series_from_values(xs);

  auto [pg, sg] = dybm::new_mean_model(1, 3, {0.4, 0.9});
  const auto preds_gauss = dybm::train_online(pg, sg, series, 3, 0.01);

  auto [pq, sq] = dybm::new_mean_model(1, 3, {0.4, 0.9});
  std::vector<GgdParams> dist{GgdParams{2.0, 0.5}};
  const auto result = dybm::ggd_train_online(pq, sq, std::move(dist), series, 3, 0.01, 100,
                                             /*readjust_enabled=*/false);

  CHECK(std::abs(pg.bias[0] - pq.bias[0]) <= 1e-12);
  for (std::size_t i = 0; i < pg.lag_weight.size(); ++i) {
    CHECK(std::abs(pg.lag_weight[i](0, 0) - pq.lag_weight[i](0, 0)) <= 1e-12);
  }
  for (std::size_t k = 0; k < pg.trace_weight.size(); ++k) {
    CHECK(std::abs(pg.trace_weight[k](0, 0) - pq.trace_weight[k](0, 0)) <= 1e-12);
  }
  for (std::size_t t = 0; t < preds_gauss.size(); ++t) {
    CHECK(std::abs(preds_gauss[t][0] - result.predictions[t][0]) <= 1e-12);
  }
}

TEST_CASE("generalized training recovers a Laplacian shape on AR(1) data") {
  const dybm::SeriesFrame series = dybm::gen_ar_ggd_series(0.6, GgdParams{1.0, 2.0}, 5000, 7);
  auto [params, state] = dybm::new_mean_model(1, 4, {0.5});
  std::vector<GgdParams> dist{GgdParams{2.0, 0.5}};
  const auto result =
      dybm::ggd_train_online(params, state, std::move(dist), series, 3, 0.01, 100);
  CHECK(result.dist[0].rho > 0.8);
  CHECK(result.dist[0].rho < 1.3);
}

TEST_CASE("generalized training under the adaptive step rule") {
  const dybm::SeriesFrame series = dybm::gen_ar_ggd_series(0.6, GgdParams{1.0, 2.0}, 4000, 21);
  auto [params, state] = dybm::new_mean_model(1, 4, {0.5});
  std::vector<GgdParams> dist{GgdParams{2.0, 0.5}};
  const auto result = dybm::ggd_train_online(params, state, std::move(dist), series, 4, 0.05,
                                             100, true, dybm::ReadjustOrder::shape_first,
                                             dybm::StepRule::adagrad);
  CHECK(result.dist[0].rho > 0.8);
  CHECK(result.dist[0].rho < 1.3);
  // Same run, same trajectory.
  auto [params2, state2] = dybm::new_mean_model(1, 4, {0.5});
  const auto again = dybm::ggd_train_online(params2, state2, {GgdParams{2.0, 0.5}}, series, 4,
                                            0.05, 100, true, dybm::ReadjustOrder::shape_first,
                                            dybm::StepRule::adagrad);
  CHECK(result.predictions == again.predictions);
  CHECK(result.dist[0].rho == again.dist[0].rho);
}

TEST_CASE("generalized training validates inputs") {
  const dybm::SeriesFrame series = dybm::series_from_values({1.0, -1.0, 0.5});
  auto [params, state] = dybm::new_mean_model(1, 2, {0.5});
  std::vector<GgdParams> dist{GgdParams{}};
  CHECK_THROWS(dybm::ggd_train_online(params, state, dist, series, 1, 0.01, 1));
  CHECK_THROWS(dybm::ggd_train_online(params, state, dist, series, 1, -0.1, 100));
  CHECK_THROWS(dybm::ggd_train_online(params, state, {}, series, 1, 0.01, 100));

  // Zero epochs: untouched parameters, no predictions.
  const auto result = dybm::ggd_train_online(params, state, dist, series, 0, 0.01, 100);
  CHECK(result.predictions.empty());
  CHECK(params.bias[0] == 0.0);
}

TEST_CASE("an absurd learning rate is reported as divergence") {
  // rho = 2 makes the location score linear in the residual, so an oversized
  // rate compounds to overflow. (For rho < 1 the score is redescending and
  // the updates stay bounded instead.)
  const dybm::SeriesFrame series =
      dybm::gen_ar_ggd_series(0.5, GgdParams{2.0, 0.5}, 400, 3);
  auto [params, state] = dybm::new_mean_model(1, 3, {0.5});
  std::vector<GgdParams> dist{GgdParams{2.0, 0.5}};
  CHECK_THROWS_AS(
      dybm::ggd_train_online(params, state, std::move(dist), series, 50, 1e9, 100),
      std::runtime_error);
}
