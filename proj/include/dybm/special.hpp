#pragma once

namespace dybm {

/// Digamma function (logarithmic derivative of the gamma function) for x > 0.
/// Upward recurrence to x >= 10 followed by the asymptotic series; absolute
/// error is below 1e-12 on the whole positive axis.
double digamma(double x);

}  // namespace dybm
