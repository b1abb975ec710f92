#include "qgp/ep.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "qgp/errors.hpp"

namespace qgp {

namespace {

constexpr double kLog2Pi = 1.8378770664093456;
constexpr double kSiteVarCap = 1e10;  // site variance cap, in units of cavity v

struct Naturals {
  Eigen::VectorXd t;   // site precisions 1/sigma2 (0 for flat sites)
  Eigen::VectorXd nu;  // site precision-mean products mu/sigma2
};

Naturals naturals_of_sites(const std::vector<SiteParams>& sites) {
  const int n = static_cast<int>(sites.size());
  Naturals nat{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (int i = 0; i < n; ++i) {
    const SiteParams& s = sites[static_cast<size_t>(i)];
    require(std::isfinite(s.mu_tilde) && std::isfinite(s.log_z_tilde) &&
                s.sigma2_tilde > 0.0,
            ErrorCode::invalid_argument,
            "ep: site " + std::to_string(i) + " has invalid parameters");
    if (std::isinf(s.sigma2_tilde)) continue;  // flat site: t = nu = 0
    nat.t[i] = 1.0 / s.sigma2_tilde;
    nat.nu[i] = s.mu_tilde / s.sigma2_tilde;
  }
  return nat;
}

// Posterior (m, S) from prior K and site naturals via the scaled identity
//   S = K - K W^{1/2} B^{-1} W^{1/2} K,  B = I + W^{1/2} K W^{1/2},
// which keeps every factorization on a matrix with eigenvalues >= 1.
struct Posterior {
  Eigen::MatrixXd S;
  Eigen::VectorXd m;
  double log_det_b = 0.0;
};

Posterior assemble_posterior(const Eigen::MatrixXd& K, const Naturals& nat) {
  const Eigen::Index n = K.rows();
  const Eigen::VectorXd ws = nat.t.cwiseSqrt();
  Eigen::MatrixXd B = ws.asDiagonal() * K * ws.asDiagonal();
  B.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(B);
  require(llt.info() == Eigen::Success, ErrorCode::ill_conditioned_kernel,
          "ep: factorization of the scaled posterior system failed");
  const Eigen::MatrixXd WK = ws.asDiagonal() * K;
  const Eigen::MatrixXd V = llt.matrixL().solve(WK);  // L^{-1} W^{1/2} K
  Posterior post;
  post.S = K - V.transpose() * V;
  post.m = post.S * nat.nu;
  post.log_det_b =
      2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  require(post.m.allFinite(), ErrorCode::numeric_failure,
          "ep: non-finite posterior mean");
  return post;
}

}  // namespace

Cavity cavity_of_site(double post_mean_i, double post_var_i,
                      const SiteParams& site) {
  require(std::isfinite(post_mean_i) && std::isfinite(post_var_i) &&
              post_var_i > 0.0,
          ErrorCode::invalid_argument,
          "cavity_of_site: posterior marginal must be finite with positive "
          "variance");
  require(site.sigma2_tilde > 0.0, ErrorCode::invalid_argument,
          "cavity_of_site: site variance must be positive");
  const double t =
      std::isinf(site.sigma2_tilde) ? 0.0 : 1.0 / site.sigma2_tilde;
  const double nu = std::isinf(site.sigma2_tilde)
                        ? 0.0
                        : site.mu_tilde / site.sigma2_tilde;
  const double cav_prec = 1.0 / post_var_i - t;
  require(std::isfinite(cav_prec) && cav_prec > 0.0, ErrorCode::ep_divergence,
          "cavity_of_site: non-positive cavity precision");
  Cavity cav;
  cav.v = 1.0 / cav_prec;
  cav.beta = cav.v * (post_mean_i / post_var_i - nu);
  require(std::isfinite(cav.beta), ErrorCode::numeric_failure,
          "cavity_of_site: non-finite cavity mean");
  return cav;
}

SiteUpdate site_update_from_moments(const TiltedMoments& moments,
                                    const Cavity& cavity) {
  require(std::isfinite(moments.mean) && std::isfinite(moments.variance) &&
              moments.variance > 0.0,
          ErrorCode::invalid_argument,
          "site_update_from_moments: moments must be finite with positive "
          "variance");
  require(cavity.v > 0.0 && std::isfinite(cavity.v), ErrorCode::invalid_argument,
          "site_update_from_moments: cavity variance must be positive");

  SiteUpdate out;
  const double cap = kSiteVarCap * cavity.v;
  // Site precision 1/sigma2 - 1/v.  Points far out in one tail of the
  // utility act as pure exponential tilts: their tilted variance equals the
  // cavity variance to rounding, so the precision underflows and is clamped
  // to the cap.  The tilt itself -- the first-moment shift -- is kept.
  double prec_hat = 1.0 / moments.variance - 1.0 / cavity.v;
  if (!(prec_hat > 1.0 / cap)) {
    out.clamped = true;
    prec_hat = 1.0 / cap;
  }
  out.site.sigma2_tilde = 1.0 / prec_hat;
  // Precision-mean chosen so that site x cavity keeps the tilted mean even
  // when the precision is clamped; equals sigma2 (mean/variance - beta/v)
  // exactly in the unclamped case, without the large-term cancellation.
  const double nu_hat =
      (moments.mean - cavity.beta) / cavity.v + moments.mean * prec_hat;
  out.site.mu_tilde = out.site.sigma2_tilde * nu_hat;
  const double tot = out.site.sigma2_tilde + cavity.v;
  const double d = out.site.mu_tilde - cavity.beta;
  out.site.log_z_tilde =
      moments.log_z + 0.5 * (kLog2Pi + std::log(tot)) + d * d / (2.0 * tot);
  require(std::isfinite(out.site.log_z_tilde) &&
              std::isfinite(out.site.mu_tilde),
          ErrorCode::numeric_failure,
          "site_update_from_moments: non-finite site parameters");
  return out;
}

double log_z_ep(const std::vector<SiteParams>& sites,
                const Eigen::MatrixXd& K) {
  require(K.rows() == K.cols(), ErrorCode::dimension_mismatch,
          "log_z_ep: K must be square");
  require(static_cast<Eigen::Index>(sites.size()) == K.rows(),
          ErrorCode::dimension_mismatch,
          "log_z_ep: site count must match K");
  const Naturals nat = naturals_of_sites(sites);

  // per-site constants of the natural-form factorization:
  //   Z_i N(q | mu_i, s2_i) = exp(C_i) exp(nu_i q - t_i q^2 / 2)
  //   C_i = log Z_i - log(2 pi s2_i)/2 - mu_i^2/(2 s2_i)
  double sum_c = 0.0;
  for (size_t i = 0; i < sites.size(); ++i) {
    const SiteParams& s = sites[i];
    sum_c += s.log_z_tilde;
    if (!std::isinf(s.sigma2_tilde))
      sum_c -= 0.5 * (kLog2Pi + std::log(s.sigma2_tilde)) +
               s.mu_tilde * s.mu_tilde / (2.0 * s.sigma2_tilde);
  }

  const Posterior post = assemble_posterior(K, nat);
  const double quad = nat.nu.dot(post.S * nat.nu);
  const double lz = sum_c - 0.5 * post.log_det_b + 0.5 * quad;
  require(std::isfinite(lz), ErrorCode::numeric_failure,
          "log_z_ep: non-finite result");
  return lz;
}

EPState run_ep(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
               const ALDParams& params, const EPConfig& config,
               const std::vector<SiteParams>* warm_start) {
  params.validate();
  const Eigen::Index n = K.rows();
  require(K.cols() == n, ErrorCode::dimension_mismatch,
          "run_ep: K must be square");
  require(y.size() == n, ErrorCode::dimension_mismatch,
          "run_ep: y length must match K");
  require(n >= 1, ErrorCode::invalid_argument, "run_ep: need at least one row");
  require(y.allFinite(), ErrorCode::invalid_argument,
          "run_ep: y must be finite");
  require(config.tol > 0.0 && config.max_sweeps >= 1 &&
              config.damping > 0.0 && config.damping <= 1.0 &&
              config.max_skip_fraction >= 0.0 &&
              config.max_skip_fraction <= 1.0,
          ErrorCode::invalid_argument, "run_ep: invalid config");
  {
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    require(llt.info() == Eigen::Success, ErrorCode::ill_conditioned_kernel,
            "run_ep: prior covariance is not positive definite");
  }

  EPState state;
  state.sites.assign(static_cast<size_t>(n), SiteParams{});
  if (warm_start) {
    require(warm_start->size() == static_cast<size_t>(n),
            ErrorCode::dimension_mismatch,
            "run_ep: warm start size mismatch");
    state.sites = *warm_start;
  }

  Naturals nat = naturals_of_sites(state.sites);
  Posterior post = assemble_posterior(K, nat);
  const double alpha = config.damping;
  const int max_skips = static_cast<int>(
      std::floor(config.max_skip_fraction * static_cast<double>(n)));

  for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
    double max_change = 0.0;
    int skips_this_sweep = 0;

    for (Eigen::Index i = 0; i < n; ++i) {
      SiteParams& site = state.sites[static_cast<size_t>(i)];
      const double s_ii = post.S(i, i);
      Cavity cav;
      try {
        cav = cavity_of_site(post.m[i], s_ii, site);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::ep_divergence) {
          ++skips_this_sweep;
          ++state.negative_cavity_skips;
          continue;
        }
        throw;
      }

      const TiltedMoments mom = tilted_moments(y[i], cav, params);
      const SiteUpdate upd = site_update_from_moments(mom, cav);
      if (upd.clamped) ++state.clamped_sites;

      const double t_new = 1.0 / upd.site.sigma2_tilde;
      const double nu_new = upd.site.mu_tilde * t_new;
      const double t_damp = (1.0 - alpha) * nat.t[i] + alpha * t_new;
      const double nu_damp = (1.0 - alpha) * nat.nu[i] + alpha * nu_new;

      const double sigma2_damp = 1.0 / t_damp;
      const double mu_damp = nu_damp / t_damp;

      // Convergence metric: the site's movement measured through the moments
      // of site x cavity (the marginal the rest of the posterior feels).
      // Raw site parameters would amplify rounding noise by sigma2/v for
      // near-flat sites -- up to the 1e10 cap -- and never settle.
      const auto effective = [&cav](double t, double nu) {
        const double prec = 1.0 / cav.v + t;
        const double s_eff = 1.0 / prec;
        return std::pair<double, double>{(cav.beta / cav.v + nu) * s_eff,
                                         s_eff};
      };
      const auto [m_old, s_old] = effective(nat.t[i], nat.nu[i]);
      const auto [m_new, s_new] = effective(t_damp, nu_damp);
      const double d_mu = std::fabs(m_new - m_old);
      const double d_s2 = std::fabs(s_new - s_old) / (1.0 + s_new);
      max_change = std::max({max_change, d_mu, d_s2});

      const double delta_t = t_damp - nat.t[i];
      const double delta_nu = nu_damp - nat.nu[i];
      const double denom = 1.0 + delta_t * s_ii;
      require(denom > 1e-12, ErrorCode::numeric_failure,
              "run_ep: rank-one posterior update lost positive definiteness");

      site.sigma2_tilde = sigma2_damp;
      site.mu_tilde = mu_damp;
      const double tot = sigma2_damp + cav.v;
      const double dm = mu_damp - cav.beta;
      site.log_z_tilde =
          mom.log_z + 0.5 * (kLog2Pi + std::log(tot)) + dm * dm / (2.0 * tot);
      nat.t[i] = t_damp;
      nat.nu[i] = nu_damp;

      const double c = delta_t / denom;
      const Eigen::VectorXd s_col = post.S.col(i);
      const double coeff = -c * post.m[i] + delta_nu * (1.0 - c * s_ii);
      post.m += coeff * s_col;
      post.S -= c * (s_col * s_col.transpose());
    }

    require(skips_this_sweep <= max_skips, ErrorCode::ep_divergence,
            "run_ep: " + std::to_string(skips_this_sweep) + " of " +
                std::to_string(n) +
                " sites had non-positive cavity precision in one sweep");

    // refresh the posterior from scratch to shed accumulated rank-one error
    post = assemble_posterior(K, nat);
    state.sweeps = sweep;
    if (max_change < config.tol) {
      state.converged = true;
      break;
    }
  }

  state.post_mean = post.m;
  state.post_cov = post.S;
  state.log_z_ep = log_z_ep(state.sites, K);
  return state;
}

}  // namespace qgp
