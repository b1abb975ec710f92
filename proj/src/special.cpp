#include "qgp/special.hpp"

#include <cmath>
#include <limits>

#include "qgp/errors.hpp"

namespace qgp {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;  // 1/sqrt(2*pi)
constexpr double kSqrt2OverPi = 0.7978845608028654; // sqrt(2/pi)
constexpr double kInvSqrtPi = 0.5641895835477563;   // 1/sqrt(pi)

// exp(x*x) with the argument split so the squared high part is exact.  A plain
// exp(x*x) loses ~x^2 * eps relative accuracy from the rounding of x*x; the
// split keeps the product at a few ulp, which erfcx needs near its branch
// boundaries.
double exp_x_squared(double x) {
  // the float round-trip keeps 24 significand bits, so xh*xh is exact and
  // x^2 = xh^2 + (x - xh)(x + xh) holds without rounding in the first term
  const double xh = static_cast<double>(static_cast<float>(x));
  const double xl = x - xh;
  return std::exp(xh * xh) * std::exp((x + xh) * xl);
}

// Asymptotic tail of erfcx for large positive x:
//   erfcx(x) ~ 1/(x sqrt(pi)) * sum_k (-1)^k (2k-1)!! / (2 x^2)^k.
// For x >= 8 the truncated sum is below 1 ulp well before k = 16.
double erfcx_asymptotic(double x) {
  const double z = 1.0 / (2.0 * x * x);
  double term = 1.0, sum = 1.0;
  for (int k = 1; k <= 16; ++k) {
    term *= -z * static_cast<double>(2 * k - 1);
    sum += term;
    if (std::fabs(term) < 1e-18 * std::fabs(sum)) break;
  }
  return sum * kInvSqrtPi / x;
}

}  // namespace

double erfcx(double x) {
  if (std::isnan(x)) return x;
  if (x >= 8.0) return erfcx_asymptotic(x);
  if (x >= 0.0) return exp_x_squared(x) * std::erfc(x);
  // erfcx(-x) = 2 exp(x^2) - erfcx(x); no cancellation since erfcx(|x|) <= 1
  if (x < -26.64) return std::numeric_limits<double>::infinity();
  return 2.0 * exp_x_squared(x) - erfcx(-x);
}

double log_erfcx(double x) {
  if (std::isnan(x)) return x;
  if (x >= 0.0) return std::log(erfcx(x));
  // erfcx(x) = exp(x^2) (2 - erfc(-x)); erfc(-x) in (0,1], so the log factor
  // lies in [0, log 2) and the only large term is the exact-ish x^2.
  return x * x + std::log(2.0 - std::erfc(-x));
}

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, ErrorCode::invalid_argument,
          "normal_quantile: p must lie in (0, 1)");
  if (p == 0.5) return 0.0;
  // Bisection on the CDF.  |z| < 39 covers every p representable in double.
  double lo = -39.0, hi = 39.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-13 * (1.0 + std::fabs(lo))) break;
  }
  return 0.5 * (lo + hi);
}

double chi2_1_quantile(double p) {
  require(p > 0.0 && p < 1.0, ErrorCode::invalid_argument,
          "chi2_1_quantile: p must lie in (0, 1)");
  const double z = normal_quantile(0.5 * (1.0 + p));
  return z * z;
}

namespace {

// Coefficients of the large-|c| expansions in e = 1/c^2 (c -> -inf):
//   hazard(c) = -c * sum_k P[k] e^k,   trunc_var(c) = e * sum_k Q[k] e^k.
constexpr double kHazardSeries[] = {1.0, 1.0, -2.0, 10.0, -74.0, 706.0,
                                    -8162.0, 110410.0, -1708394.0,
                                    29752066.0, -576037442.0};
constexpr double kVarSeries[] = {1.0, -6.0, 50.0, -518.0, 6354.0, -89782.0,
                                 1435330.0, -25625910.0, 505785122.0,
                                 -10944711398.0};

double poly_eval(const double* c, int n, double e) {
  double s = 0.0;
  for (int i = n - 1; i >= 0; --i) s = s * e + c[i];
  return s;
}

}  // namespace

double trunc_hazard(double c) {
  if (c <= -14.0) {
    const double e = 1.0 / (c * c);
    return -c * poly_eval(kHazardSeries, 11, e);
  }
  if (c >= 37.5) return 0.0;  // phi(c) underflows against Phi(c) ~ 1
  return kSqrt2OverPi / erfcx(-c / kSqrt2);
}

double trunc_var(double c) {
  if (c <= -14.0) {
    const double e = 1.0 / (c * c);
    return e * poly_eval(kVarSeries, 10, e);
  }
  if (c >= 37.5) return 1.0;
  const double h = kSqrt2OverPi / erfcx(-c / kSqrt2);
  return 1.0 - c * h - h * h;
}

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = a > b ? a : b;
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}

}  // namespace qgp
