#ifndef QGP_SPECIAL_HPP
#define QGP_SPECIAL_HPP

// Scalar special functions used by the ALD moment computations and the data
// generators.  Everything here is pure and deterministic.

namespace qgp {

// Scaled complementary error function exp(x^2) * erfc(x).
// Relative accuracy is a few ulp over the full double range; overflows to
// +inf for x < -26.64 (use log_erfcx there).
double erfcx(double x);

// log(erfcx(x)), finite for all finite x.  For x >= 0 this is just the log of
// erfcx; for x < 0 it is computed as x^2 + log(2 - erfc(-x)) so it stays
// finite where erfcx itself overflows.
double log_erfcx(double x);

// Standard normal density and CDF.
double normal_pdf(double x);
double normal_cdf(double x);

// Inverse standard normal CDF by bisection on erfc (deterministic,
// platform-independent).  p must lie in (0, 1).
double normal_quantile(double p);

// Quantile of the chi-squared distribution with one degree of freedom:
// Q(p) = (normal_quantile((1+p)/2))^2.  p in (0, 1).
double chi2_1_quantile(double p);

// Moments of a standard normal truncated to the lower tail {X <= c}:
//   trunc_hazard(c)  = phi(c) / Phi(c)          (so E[X | X <= c] = -trunc_hazard(c))
//   trunc_var(c)     = 1 - c*h - h^2, h = trunc_hazard(c)
// Both stay accurate for c -> -inf (asymptotic series) and saturate cleanly
// for large positive c (h -> 0, var -> 1).
double trunc_hazard(double c);
double trunc_var(double c);

// log(exp(a) + exp(b)) without overflow.
double log_add_exp(double a, double b);

}  // namespace qgp

#endif
