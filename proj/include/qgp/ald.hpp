#ifndef QGP_ALD_HPP
#define QGP_ALD_HPP

namespace qgp {

// Parameters of the asymmetric Laplace utility: quantile level tau in (0, 1)
// and utility width sigma > 0.
struct ALDParams {
  double tau = 0.5;
  double sigma = 1.0;

  void validate() const;
};

// Gaussian cavity: q ~ N(beta, v), v > 0.
struct Cavity {
  double beta = 0.0;
  double v = 1.0;
};

// Moments of the tilted density p(q) \propto U(y, q) N(q | beta, v), where
//   U(y, q) = (tau (1-tau) / sigma) exp(-L_tau(y - q) / sigma)
// and L_tau is the tilted (pinball) loss.  log_z is the log of the
// normalizing integral \int U(y, q) N(q | beta, v) dq.
struct TiltedMoments {
  double log_z = 0.0;
  double mean = 0.0;
  double variance = 0.0;
};

// Tilted (pinball) loss: tau * r for r >= 0, -(1 - tau) * r otherwise.
double tilted_loss(double r, double tau);

// Log-density of the asymmetric Laplace distribution at t with location mu:
//   log(tau (1-tau) / sigma) - L_tau(t - mu) / sigma
double ald_log_density(double t, double mu, const ALDParams& params);

// Closed-form tilted moments.  Stable across the full regime map: sharp
// utilities (v >> sigma^2), wide utilities (sigma^2 >> v), and observations
// far into either tail.  The tilted density is a two-piece truncated-Gaussian
// mixture in the standardized variable z = (q - beta)/sqrt(v); the pieces are
// combined with their exact normalizers so no exp overflows and the variance
// is assembled from non-negative terms only.
TiltedMoments tilted_moments(double y, const Cavity& cavity,
                             const ALDParams& params);

// Ground-truth oracle: the same moments by adaptive panel-based
// Gauss-Legendre quadrature in z-space with log-space max subtraction.
// Runs the rule at `order` and 2*`order` nodes per panel and raises
// oracle-failure if the two disagree, so every returned value is
// self-verified.  Independent of the closed form above (it integrates the
// utility definition directly).
TiltedMoments tilted_moments_quadrature(double y, const Cavity& cavity,
                                        const ALDParams& params,
                                        int order = 40);

}  // namespace qgp

#endif
