#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dybm/mean_model.hpp"
#include "dybm/rng.hpp"

namespace dybm {

/// Generalized Gaussian parameters for one output dimension: shape rho
/// (2 = Gaussian, 1 = Laplacian, smaller = heavier tails) and inverse
/// variance beta. Density: sqrt(beta)/(2*Gamma(1+1/rho)) * exp(-beta^(rho/2)*|x-mu|^rho).
struct GgdParams {
  double rho = 2.0;
  double beta = 0.5;
};

/// Residual magnitudes are floored at this value inside the fractional powers
/// and logs of the score functions, which are singular at zero residual for
/// rho < 1. The bias introduced is O(floor).
inline constexpr double kResidualFloor = 1e-8;

/// Shape search interval for the moment-ratio estimator; estimates outside it
/// are clamped to the nearer end.
inline constexpr double kRhoMin = 0.1;
inline constexpr double kRhoMax = 20.0;

/// Log density at x.
double ggd_logpdf(double x, double mu, const GgdParams& p);

/// Scores of the log density; residuals are floored at kResidualFloor.
double ggd_grad_beta(double x, double mu, const GgdParams& p);
double ggd_grad_rho(double x, double mu, const GgdParams& p);
double ggd_grad_mu(double x, double mu, const GgdParams& p);

/// Closed-form maximum-likelihood inverse variance for a fixed shape:
///   beta = (T / (rho * sum_t |e_t|^rho))^(2/rho).
/// Throws when every residual is (near) zero.
double mle_beta(std::span<const double> residuals, double rho);

/// Moment ratio c = (mean |e|)^2 / mean e^2. Lies in (0,1]; callers clamp
/// before inverting. Throws on all-zero residuals.
double moment_ratio_c(std::span<const double> residuals);

/// Clamps a raw moment ratio into the invertible range [1e-4, 0.75 - 1e-6].
double clamp_moment_ratio(double c);

/// Population moment ratio c(rho) = Gamma(2/rho)^2 / (Gamma(1/rho)*Gamma(3/rho)),
/// strictly increasing, with limits 0 and 3/4.
double ggd_moment_ratio(double rho);

/// Inverts c(rho) by bisection on [kRhoMin, kRhoMax] to 1e-10; targets beyond
/// the interval's image clamp to the nearer endpoint. Requires c in (0, 0.75).
double rho_from_c(double c);

/// Log-ratio approximation of the inverse, valid for c in (0, 0.131246);
/// agrees with rho_from_c within 15% on that range. Kept as a cheap
/// cross-check; rho_from_c is the canonical estimator.
double rho_from_c_fast(double c);

/// i.i.d. draws: x = mu +/- G^(1/rho)/sqrt(beta) with G ~ Gamma(1/rho, 1) and
/// an equiprobable sign.
std::vector<double> sample_ggd(double mu, const GgdParams& p, std::size_t n, Rng& rng);
std::vector<double> sample_ggd(double mu, const GgdParams& p, std::size_t n, std::uint64_t seed);

/// Sliding window of the most recent `period` residuals for one dimension.
/// Insertion order inside the window is not preserved (only the multiset of
/// values matters to the estimators).
class ResidualBuffer {
 public:
  explicit ResidualBuffer(std::size_t period);

  void push(double residual);
  bool full() const { return count_ >= window_.size(); }
  std::size_t capacity() const { return window_.size(); }
  const std::vector<double>& window() const { return window_; }

  /// True when no residual in the window exceeds kResidualFloor in magnitude.
  bool degenerate() const;

 private:
  std::vector<double> window_;
  std::size_t next_ = 0;
  std::size_t count_ = 0;
};

/// Which parameter the periodic readjustment recomputes first. shape_first
/// derives the new shape from the window and then the inverse variance under
/// that shape; scale_first recomputes the inverse variance under the old
/// shape before re-estimating the shape.
enum class ReadjustOrder { shape_first, scale_first };

/// Periodic moment-based re-estimation of (rho, beta) from a full residual
/// window. Throws when the buffer is not full or is degenerate.
GgdParams readjust(const GgdParams& p, const ResidualBuffer& buffer,
                   ReadjustOrder order = ReadjustOrder::shape_first);

struct GgdTrainResult {
  std::vector<std::vector<double>> predictions;  // final learning-free pass
  std::vector<GgdParams> dist;                   // per-dimension noise parameters
};

/// Online training of the mean model under generalized-Gaussian noise: the
/// location score ggd_grad_mu replaces the Gaussian error term in every
/// parameter update. Every `readjust_period` steps the per-dimension
/// (rho, beta) are re-estimated from the statistics of ALL residuals seen so
/// far (the update count grows with training); between readjustments they
/// stay fixed. Degenerate residual records skip the readjustment.
///
/// A fixed-size sliding window is deliberately not used here: its shape
/// estimate is noisy enough to wander above rho = 2, where the location score
/// grows superlinearly in the residual and constant-rate training can
/// destabilize. The growing record tightens the estimate as training
/// proceeds.
GgdTrainResult ggd_train_online(MeanModelParams& params, MeanModelState& state,
                                std::vector<GgdParams> dist, const SeriesFrame& series,
                                int epochs, double lr, std::size_t readjust_period,
                                bool readjust_enabled = true,
                                ReadjustOrder order = ReadjustOrder::shape_first,
                                StepRule rule = StepRule::sgd);

/// The readjustment rule applied to an explicit residual record (shared by
/// ggd_train_online and the experiment harness): clamp the moment ratio,
/// invert it for the shape, then recompute the inverse variance (order per
/// `order`). Throws when every residual is (near) zero.
GgdParams readjust_from_record(const GgdParams& current, std::span<const double> residuals,
                               ReadjustOrder order = ReadjustOrder::shape_first);

}  // namespace dybm
