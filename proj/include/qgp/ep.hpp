#ifndef QGP_EP_HPP
#define QGP_EP_HPP

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "qgp/ald.hpp"

namespace qgp {

// One Gaussian site approximation \tilde{t}_i(q_i) = \tilde{Z}_i
// N(q_i | mu_tilde, sigma2_tilde).  A freshly initialized site is flat:
// sigma2_tilde = +inf, mu_tilde = 0, log_z_tilde = 0 (the site is the
// constant 1).
struct SiteParams {
  double log_z_tilde = 0.0;
  double mu_tilde = 0.0;
  double sigma2_tilde = std::numeric_limits<double>::infinity();
};

struct EPConfig {
  double tol = 1e-6;             // site-change convergence threshold
  int max_sweeps = 100;
  double damping = 0.8;          // fraction of the new natural params accepted
  double max_skip_fraction = 0.25;  // negative-cavity skips tolerated per sweep
  double jitter = 1e-8;          // relative diagonal jitter used by callers
};

struct EPState {
  std::vector<SiteParams> sites;
  Eigen::VectorXd post_mean;   // posterior mean of q at the training inputs
  Eigen::MatrixXd post_cov;    // posterior covariance
  double log_z_ep = 0.0;       // log of the EP expected-utility estimate
  int sweeps = 0;
  bool converged = false;
  int negative_cavity_skips = 0;  // total over the run
  int clamped_sites = 0;          // site updates hitting the variance cap
};

// Cavity distribution of site i obtained by dividing the site out of the
// posterior marginal:  v = (1/S_ii - 1/sigma2_i)^{-1},
// beta = v (m_i/S_ii - mu_i/sigma2_i).  Throws ep-divergence if the cavity
// precision is not positive.
Cavity cavity_of_site(double post_mean_i, double post_var_i,
                      const SiteParams& site);

// Site natural-parameter update from matched tilted moments, including the
// updated log_z_tilde.  Site variances are capped at 1e10 * cavity.v; a
// non-positive implied precision takes the capped branch (counted by the
// caller via the returned flag).
struct SiteUpdate {
  SiteParams site;
  bool clamped = false;
};
SiteUpdate site_update_from_moments(const TiltedMoments& moments,
                                    const Cavity& cavity);

// Full EP fixpoint iteration for the asymmetric-Laplace utility sites.
//   K: prior covariance at the training inputs (positive definite, jitter
//      already applied), y: targets, params: (tau, sigma).
// Sequential damped sweeps with rank-one posterior updates and a full
// recomputation of (post_mean, post_cov) from the site parameters at the end
// of every sweep.  `warm_start` (optional) seeds the sites from a previous
// run on the same data shape.
EPState run_ep(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
               const ALDParams& params, const EPConfig& config,
               const std::vector<SiteParams>* warm_start = nullptr);

// log of the EP normalization estimate for given sites and prior covariance:
//   log Z_EP = sum_i C_i - 1/2 log|B| + 1/2 nu^T S nu
// with B = I + W^{1/2} K W^{1/2}, S = (K^{-1} + W)^{-1}, W = diag(1/sigma2_i),
// nu_i = mu_i / sigma2_i, and C_i the site constant in natural form.  Flat
// sites (sigma2 = inf) contribute exp(log_z_tilde) only.
double log_z_ep(const std::vector<SiteParams>& sites,
                const Eigen::MatrixXd& K);

}  // namespace qgp

#endif
