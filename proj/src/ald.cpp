#include "qgp/ald.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qgp/errors.hpp"
#include "qgp/special.hpp"

namespace qgp {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865476;
}

void ALDParams::validate() const {
  require(std::isfinite(tau) && tau > 0.0 && tau < 1.0,
          ErrorCode::invalid_argument, "ald: tau must lie in (0, 1)");
  require(std::isfinite(sigma) && sigma > 0.0, ErrorCode::invalid_argument,
          "ald: sigma must be positive");
}

double tilted_loss(double r, double tau) {
  return r >= 0.0 ? tau * r : -(1.0 - tau) * r;
}

double ald_log_density(double t, double mu, const ALDParams& params) {
  params.validate();
  return std::log(params.tau * (1.0 - params.tau) / params.sigma) -
         tilted_loss(t - mu, params.tau) / params.sigma;
}

// In z = (q - beta)/sqrt(v) the tilted density is proportional to
//   exp(-u^2/2) * { N(z | m_a, 1) / phi(m_a - u)_scale ... }
// concretely: completing the square on each side of the kink u = (y-beta)/sqrt(v)
// with s = sqrt(v)/sigma gives
//   piece a on z <= u:  N(z | m_a, 1), m_a = tau * s
//   piece b on z >  u:  N(z | m_b, 1), m_b = -(1 - tau) * s
// with piece masses E_a = erfcx(xi_a)/2, E_b = erfcx(xi_b)/2 where
//   xi_a = (m_a - u)/sqrt(2),  xi_b = (u - m_b)/sqrt(2),
// and total integral  Z = (tau(1-tau)/sigma) exp(-u^2/2) (E_a + E_b).
// The erfcx form keeps every factor finite even when the pieces are truncated
// hundreds of standard deviations into their tails.
TiltedMoments tilted_moments(double y, const Cavity& cavity,
                             const ALDParams& params) {
  params.validate();
  require(std::isfinite(y), ErrorCode::invalid_argument,
          "tilted_moments: y must be finite");
  require(std::isfinite(cavity.beta) && std::isfinite(cavity.v) &&
              cavity.v > 0.0,
          ErrorCode::invalid_argument,
          "tilted_moments: cavity must have finite beta and positive v");

  const double tau = params.tau;
  const double rv = std::sqrt(cavity.v);
  const double u = (y - cavity.beta) / rv;
  const double s = rv / params.sigma;
  const double m_a = tau * s;
  const double m_b = -(1.0 - tau) * s;
  const double xi_a = (m_a - u) * kInvSqrt2;
  const double xi_b = (u - m_b) * kInvSqrt2;

  // piece weights; direct ratio where both erfcx values are representable
  // (keeps symmetric cases exactly balanced), log-space otherwise
  double w, log_mass;
  if (xi_a > -26.0 && xi_b > -26.0) {
    const double e_a = 0.5 * erfcx(xi_a);
    const double e_b = 0.5 * erfcx(xi_b);
    w = e_a / (e_a + e_b);
    log_mass = std::log(e_a + e_b);
  } else {
    const double l_a = log_erfcx(xi_a) - 0.6931471805599453;
    const double l_b = log_erfcx(xi_b) - 0.6931471805599453;
    log_mass = log_add_exp(l_a, l_b);
    w = std::exp(l_a - log_mass);
  }

  // truncated-piece moments via the lower-tail hazard h(c) = phi(c)/Phi(c):
  // piece a is N(m_a,1) truncated to z <= u, piece b is N(m_b,1) truncated to
  // z >= u (reflected onto the same lower-tail form)
  const double c_a = u - m_a;
  const double c_b = m_b - u;
  const double mean_a = m_a - trunc_hazard(c_a);
  const double mean_b = m_b + trunc_hazard(c_b);
  const double var_a = trunc_var(c_a);
  const double var_b = trunc_var(c_b);

  const double mean_z = w * mean_a + (1.0 - w) * mean_b;
  const double spread = mean_a - mean_b;
  const double var_z =
      w * var_a + (1.0 - w) * var_b + w * (1.0 - w) * spread * spread;

  TiltedMoments out;
  out.log_z =
      std::log(tau * (1.0 - tau) / params.sigma) - 0.5 * u * u + log_mass;
  out.mean = cavity.beta + rv * mean_z;
  // the exact tilted variance is strictly below v; rounding can push the
  // mixture sum a hair above it, so clamp to keep the contraction property
  out.variance = std::min(cavity.v * var_z, cavity.v);

  require(std::isfinite(out.log_z) && std::isfinite(out.mean) &&
              std::isfinite(out.variance) && out.variance > 0.0,
          ErrorCode::numeric_failure,
          "tilted_moments: non-finite result for tau=" + std::to_string(tau) +
              " sigma=" + std::to_string(params.sigma));
  return out;
}

}  // namespace qgp
