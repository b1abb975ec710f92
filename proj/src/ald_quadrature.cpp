#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "qgp/ald.hpp"
#include "qgp/errors.hpp"

namespace qgp {

namespace {

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
// Legendre recurrence.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(3.141592653589793 * (i + 0.75) / (n + 0.5));
    double deriv = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * t * p1 - j * p2) / (j + 1.0);
      }
      deriv = n * (t * p0 - p1) / (t * t - 1.0);
      const double dt = p0 / deriv;
      t -= dt;
      if (std::fabs(dt) < 1e-15) break;
    }
    x[i] = -t;
    x[n - 1 - i] = t;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - t * t) * deriv * deriv);
  }
}

struct NodeSet {
  std::vector<double> z;       // evaluation points
  std::vector<double> weight;  // quadrature weight * exp(logf - shift)
  std::vector<double> logf;
};

// Geometric panel edges radiating out from `peak`, starting at step h0 and
// doubling, clipped to [lo, hi].  Resolves the integrand at its natural scale
// near the peak without wasting panels in the far tail.
void panel_edges(double peak, double lo, double hi, double h0,
                 std::vector<double>& edges) {
  edges.push_back(peak);
  for (const double dir : {-1.0, 1.0}) {
    const double limit = dir < 0 ? lo : hi;
    double h = h0;
    for (int k = 0; k < 300; ++k) {
      const double z = peak + dir * h;
      if ((dir < 0 && z <= limit) || (dir > 0 && z >= limit)) break;
      edges.push_back(z);
      h *= 2.0;
    }
  }
  edges.push_back(lo);
  edges.push_back(hi);
}

}  // namespace

TiltedMoments tilted_moments_quadrature(double y, const Cavity& cavity,
                                        const ALDParams& params, int order) {
  params.validate();
  require(order >= 4 && order <= 400, ErrorCode::invalid_argument,
          "tilted_moments_quadrature: order must lie in [4, 400]");
  require(std::isfinite(y), ErrorCode::invalid_argument,
          "tilted_moments_quadrature: y must be finite");
  require(std::isfinite(cavity.beta) && std::isfinite(cavity.v) &&
              cavity.v > 0.0,
          ErrorCode::invalid_argument,
          "tilted_moments_quadrature: cavity must have finite beta and "
          "positive v");

  const double tau = params.tau;
  const double rv = std::sqrt(cavity.v);
  const double u = (y - cavity.beta) / rv;
  const double s = rv / params.sigma;
  const double m_a = tau * s;          // mode of the lower piece (z <= u)
  const double m_b = -(1.0 - tau) * s; // mode of the upper piece (z >  u)

  // log integrand in z, up to the constant log(tau(1-tau)/sigma) - log(2pi)/2
  const auto log_f = [&](double z) {
    const double r = y - (cavity.beta + rv * z);
    return -tilted_loss(r, tau) / params.sigma - 0.5 * z * z;
  };

  const auto run = [&](int n) {
    std::vector<double> gx, gw;
    gauss_legendre(n, gx, gw);

    NodeSet nodes;
    // piece (lo side): z in [lo_a, u]; piece (hi side): z in [u, hi_b].
    // Each piece peaks either at its Gaussian mode or at the kink, and decays
    // from the kink at rate |mode - u|, so step size and reach follow that.
    const double peak_a = std::min(m_a, u);
    const double peak_b = std::max(m_b, u);
    const double rate_a = std::max(1.0, std::fabs(u - m_a));
    const double rate_b = std::max(1.0, std::fabs(u - m_b));
    const double lo_a = peak_a - (13.0 + 60.0 / rate_a);
    const double hi_b = peak_b + (13.0 + 60.0 / rate_b);

    const struct {
      double peak, lo, hi, h0;
    } pieces[2] = {
        {peak_a, lo_a, u, 0.25 / rate_a},
        {peak_b, u, hi_b, 0.25 / rate_b},
    };

    double shift = -std::numeric_limits<double>::infinity();
    for (const auto& pc : pieces) {
      if (!(pc.lo < pc.hi)) continue;
      std::vector<double> edges;
      panel_edges(std::clamp(pc.peak, pc.lo, pc.hi), pc.lo, pc.hi, pc.h0,
                  edges);
      std::sort(edges.begin(), edges.end());
      edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
      for (size_t e = 0; e + 1 < edges.size(); ++e) {
        const double c = 0.5 * (edges[e] + edges[e + 1]);
        const double hw = 0.5 * (edges[e + 1] - edges[e]);
        if (!(hw > 0.0)) continue;
        for (int i = 0; i < n; ++i) {
          const double z = c + hw * gx[static_cast<size_t>(i)];
          const double lf = log_f(z);
          nodes.z.push_back(z);
          nodes.weight.push_back(gw[static_cast<size_t>(i)] * hw);
          nodes.logf.push_back(lf);
          shift = std::max(shift, lf);
        }
      }
    }

    double s0 = 0.0, s1 = 0.0;
    for (size_t i = 0; i < nodes.z.size(); ++i) {
      const double f = nodes.weight[i] * std::exp(nodes.logf[i] - shift);
      nodes.weight[i] = f;  // reuse as scaled mass for the second pass
      s0 += f;
      s1 += f * nodes.z[i];
    }
    require(std::isfinite(s0) && s0 > 0.0, ErrorCode::oracle_failure,
            "tilted_moments_quadrature: zero or non-finite integral mass");
    const double mean_z = s1 / s0;
    double s2 = 0.0;
    for (size_t i = 0; i < nodes.z.size(); ++i) {
      const double d = nodes.z[i] - mean_z;
      s2 += nodes.weight[i] * d * d;
    }

    TiltedMoments m;
    m.log_z = std::log(tau * (1.0 - tau) / params.sigma) -
              0.9189385332046727 /* log(2*pi)/2 */ + shift + std::log(s0);
    m.mean = cavity.beta + rv * mean_z;
    m.variance = cavity.v * (s2 / s0);
    return m;
  };

  const TiltedMoments coarse = run(order);
  const TiltedMoments fine = run(2 * order);

  // self-check: the doubled rule must agree or the result is not trustworthy
  const double mean_scale = std::max(std::fabs(fine.mean), rv);
  const bool ok =
      std::fabs(fine.log_z - coarse.log_z) <= 1e-9 &&
      std::fabs(fine.mean - coarse.mean) <= 1e-9 * mean_scale &&
      std::fabs(fine.variance - coarse.variance) <= 1e-9 * cavity.v;
  require(ok, ErrorCode::oracle_failure,
          "tilted_moments_quadrature: node doubling did not converge");
  return fine;
}

}  // namespace qgp
