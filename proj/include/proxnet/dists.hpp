#pragma once

#include <cmath>
#include <limits>

namespace proxnet {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double sigmoid(double t) {
  return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double log1pexp(double t) {
  if (t > 35.0) return t;
  if (t < -35.0) return std::exp(t);
  return std::log1p(std::exp(t));
}

// log Pr(y | p = sigmoid(t)) without forming p
inline double bernoulli_loglik_logit(int y, double t) {
  return y ? -log1pexp(-t) : -log1pexp(t);
}

inline double bernoulli_loglik(int y, double p) {
  if (p <= 0.0) return y ? kNegInf : 0.0;
  if (p >= 1.0) return y ? 0.0 : kNegInf;
  return y ? std::log(p) : std::log1p(-p);
}

inline double log_normal_pdf(double x, double mu, double sd) {
  double z = (x - mu) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
}

// HalfNormal(scale): density 2/(scale sqrt(2pi)) exp(-x^2/(2 scale^2)), x >= 0
inline double log_half_normal_pdf(double x, double scale) {
  if (x < 0) return kNegInf;
  double z = x / scale;
  return std::log(2.0) - 0.5 * z * z - std::log(scale) - 0.5 * std::log(2.0 * M_PI);
}

// b - a with the conventions needed for log-likelihood differences where
// either side may be -inf (impossible states).
inline double ll_diff(double b, double a) {
  if (std::isinf(a) && std::isinf(b)) return 0.0;
  return b - a;
}

// Standard-normal quantile, Acklam's rational approximation (|rel err| < 1.2e-9).
inline double normal_quantile(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return kNegInf;
    if (p == 1.0) return -kNegInf;
    return std::numeric_limits<double>::quiet_NaN();
  }
  constexpr double plow = 0.02425;
  double q, x;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley refinement against erfc keeps the tails tight.
  double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

}  // namespace proxnet
