#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "qgp/ald.hpp"
#include "qgp/ep.hpp"
#include "qgp/errors.hpp"
#include "qgp/kernel.hpp"

using namespace qgp;

namespace {

constexpr double kLog2Pi = 1.8378770664093455;

template <typename Fn>
std::string thrown_code(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code_name();
  }
  return "(no error)";
}

// Brute-force ground truth for small N: midpoint tensor-grid integration of
//   Z = int N(q | 0, K) prod_i U(y_i, q_i) dq
// over [lo, hi]^N, together with the posterior mean of q.
struct GridTruth {
  double log_z = 0.0;
  Eigen::VectorXd mean;
};

GridTruth tensor_grid_truth(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                            const ALDParams& p, double lo, double hi,
                            int nodes) {
  const int n = static_cast<int>(K.rows());
  const double h = (hi - lo) / nodes;
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  REQUIRE(llt.info() == Eigen::Success);
  const Eigen::MatrixXd A = llt.solve(Eigen::MatrixXd::Identity(n, n));
  const double log_det_k =
      2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double log_norm = -0.5 * (n * kLog2Pi + log_det_k);

  std::vector<double> node(static_cast<size_t>(nodes));
  for (int j = 0; j < nodes; ++j) node[static_cast<size_t>(j)] = lo + h * (j + 0.5);
  std::vector<double> util(static_cast<size_t>(n * nodes));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < nodes; ++j)
      util[static_cast<size_t>(i * nodes + j)] =
          ald_log_density(y[i], node[static_cast<size_t>(j)], p);

  const auto for_each_node = [&](auto&& visit) {
    std::vector<int> idx(static_cast<size_t>(n), 0);
    std::vector<double> q(static_cast<size_t>(n));
    while (true) {
      double lg = log_norm;
      for (int i = 0; i < n; ++i) {
        q[static_cast<size_t>(i)] = node[static_cast<size_t>(idx[static_cast<size_t>(i)])];
        lg += util[static_cast<size_t>(i * nodes + idx[static_cast<size_t>(i)])];
      }
      double quad = 0.0;
      for (int i = 0; i < n; ++i) {
        double ai = 0.0;
        for (int j = 0; j < n; ++j) ai += A(i, j) * q[static_cast<size_t>(j)];
        quad += q[static_cast<size_t>(i)] * ai;
      }
      visit(lg - 0.5 * quad, q);
      int d = 0;
      while (d < n && ++idx[static_cast<size_t>(d)] == nodes) {
        idx[static_cast<size_t>(d)] = 0;
        ++d;
      }
      if (d == n) break;
    }
  };

  double mx = -std::numeric_limits<double>::infinity();
  for_each_node([&](double lg, const std::vector<double>&) {
    if (lg > mx) mx = lg;
  });
  double total = 0.0;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
  for_each_node([&](double lg, const std::vector<double>& q) {
    const double w = std::exp(lg - mx);
    total += w;
    for (int i = 0; i < n; ++i) acc[i] += w * q[static_cast<size_t>(i)];
  });

  GridTruth out;
  out.log_z = mx + std::log(total) + n * std::log(h);
  out.mean = acc / total;
  return out;
}

Eigen::MatrixXd se_kernel(const Eigen::VectorXd& x, double ell, double amp,
                          double jitter = 0.0) {
  Eigen::MatrixXd X(x.size(), 1);
  X.col(0) = x;
  Eigen::MatrixXd K = covariance(X, X, KernelParams{{ell}, amp});
  K.diagonal().array() += jitter * amp * amp;
  return K;
}

}  // namespace

TEST_CASE("cavity_of_site") {
  // dividing a unit site out of a posterior marginal (1, 0.5)
  SiteParams s;
  s.mu_tilde = 0.0;
  s.sigma2_tilde = 1.0;
  const Cavity c = cavity_of_site(1.0, 0.5, s);
  CHECK(c.v == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(c.beta == doctest::Approx(2.0).epsilon(1e-14));

  // a flat site leaves the marginal untouched
  const Cavity cf = cavity_of_site(0.7, 1.3, SiteParams{});
  CHECK(cf.v == doctest::Approx(1.3).epsilon(1e-14));
  CHECK(cf.beta == doctest::Approx(0.7).epsilon(1e-14));

  // site sharper than the marginal: non-positive cavity precision
  SiteParams sharp;
  sharp.sigma2_tilde = 0.5;
  CHECK(thrown_code([&] { cavity_of_site(1.0, 1.0, sharp); }) ==
        "ep-divergence");
}

TEST_CASE("site_update_from_moments reproduces the tilted moments") {
  // dividing the cavity back out of the site must recover mass and moments:
  // site x cavity = mass * N(q | m*, s*) with
  //   s* = (1/sigma2 + 1/v)^{-1},  m* = s* (mu/sigma2 + beta/v),
  //   log mass = log_z_tilde - log(2 pi (sigma2 + v))/2 - (mu - beta)^2 / ...
  TiltedMoments m;
  m.log_z = -1.2;
  m.mean = 0.8;
  m.variance = 0.5;
  const Cavity cav{1.0, 1.0};
  const SiteUpdate u = site_update_from_moments(m, cav);
  CHECK_FALSE(u.clamped);
  CHECK(u.site.sigma2_tilde == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(u.site.mu_tilde == doctest::Approx(0.6).epsilon(1e-14));

  const double s_star = 1.0 / (1.0 / u.site.sigma2_tilde + 1.0 / cav.v);
  const double m_star =
      s_star * (u.site.mu_tilde / u.site.sigma2_tilde + cav.beta / cav.v);
  const double tot = u.site.sigma2_tilde + cav.v;
  const double d = u.site.mu_tilde - cav.beta;
  const double log_mass =
      u.site.log_z_tilde - 0.5 * (kLog2Pi + std::log(tot)) - d * d / (2.0 * tot);
  CHECK(m_star == doctest::Approx(m.mean).epsilon(1e-13));
  CHECK(s_star == doctest::Approx(m.variance).epsilon(1e-13));
  CHECK(log_mass == doctest::Approx(m.log_z).epsilon(1e-13));
}

TEST_CASE("site update clamps when the tilt carries no curvature") {
  // tilted variance exactly equal to the cavity variance: implied site
  // precision is zero, the cap engages, and the site must still reproduce
  // the tilted mean through the site x cavity product
  TiltedMoments m;
  m.log_z = -3.0;
  m.mean = 5.5;
  m.variance = 2.0;
  const Cavity cav{0.25, 2.0};
  const SiteUpdate u = site_update_from_moments(m, cav);
  CHECK(u.clamped);
  CHECK(u.site.sigma2_tilde == doctest::Approx(1e10 * cav.v).epsilon(1e-12));
  const double s_star = 1.0 / (1.0 / u.site.sigma2_tilde + 1.0 / cav.v);
  const double m_star =
      s_star * (u.site.mu_tilde / u.site.sigma2_tilde + cav.beta / cav.v);
  CHECK(m_star == doctest::Approx(m.mean).epsilon(1e-12));

  // variance cap also engages when the implied precision is negative
  TiltedMoments wide = m;
  wide.variance = 2.0000001;
  CHECK(site_update_from_moments(wide, cav).clamped);
}

TEST_CASE("single-site EP is exact") {
  const double k11 = 2.25;
  Eigen::MatrixXd K(1, 1);
  K << k11;
  const ALDParams p{0.3, 0.6};
  EPConfig cfg;
  cfg.damping = 1.0;
  cfg.tol = 1e-10;
  for (double y1 : {-2.0, -0.4, 0.0, 1.3, 2.8}) {
    CAPTURE(y1);
    Eigen::VectorXd y(1);
    y << y1;
    const EPState st = run_ep(K, y, p, cfg);
    CHECK(st.converged);
    CHECK(st.sweeps <= 3);
    const TiltedMoments ref = tilted_moments(y1, Cavity{0.0, k11}, p);
    CHECK(st.post_mean[0] == doctest::Approx(ref.mean).epsilon(1e-10));
    CHECK(st.post_cov(0, 0) == doctest::Approx(ref.variance).epsilon(1e-10));
    CHECK(st.log_z_ep == doctest::Approx(ref.log_z).epsilon(1e-10));
  }
}

TEST_CASE("EP factorizes over independent sites") {
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(2, 2);
  K(0, 0) = 1.5;
  K(1, 1) = 0.4;
  Eigen::VectorXd y(2);
  y << 0.3, -0.2;
  const ALDParams p{0.7, 0.5};
  EPConfig cfg;
  cfg.damping = 1.0;
  cfg.tol = 1e-10;
  const EPState st = run_ep(K, y, p, cfg);
  CHECK(st.converged);
  const TiltedMoments r0 = tilted_moments(y[0], Cavity{0.0, K(0, 0)}, p);
  const TiltedMoments r1 = tilted_moments(y[1], Cavity{0.0, K(1, 1)}, p);
  CHECK(st.post_mean[0] == doctest::Approx(r0.mean).epsilon(1e-9));
  CHECK(st.post_mean[1] == doctest::Approx(r1.mean).epsilon(1e-9));
  CHECK(st.post_cov(0, 0) == doctest::Approx(r0.variance).epsilon(1e-9));
  CHECK(st.post_cov(1, 1) == doctest::Approx(r1.variance).epsilon(1e-9));
  CHECK(st.log_z_ep == doctest::Approx(r0.log_z + r1.log_z).epsilon(1e-9));
}

TEST_CASE("EP log evidence matches a correlated two-site grid truth") {
  Eigen::VectorXd x(2);
  x << 0.0, 1.0;
  const Eigen::MatrixXd K = se_kernel(x, 0.8, 1.2);
  Eigen::VectorXd y(2);
  y << 0.5, -0.3;
  const ALDParams p{0.25, 0.5};
  const EPState st = run_ep(K, y, p, EPConfig{});
  CHECK(st.converged);
  const GridTruth truth = tensor_grid_truth(K, y, p, -7.0, 7.0, 500);
  CHECK(std::fabs(st.log_z_ep - truth.log_z) <= 0.05);
  CHECK((st.post_mean - truth.mean).cwiseAbs().maxCoeff() <= 0.05);
}

TEST_CASE("EP log evidence matches a three-site grid truth") {
  // three evenly spaced inputs under a unit squared-exponential prior
  Eigen::VectorXd x(3);
  x << 0.0, 0.5, 1.0;
  const Eigen::MatrixXd K = se_kernel(x, 1.0, 1.0);
  Eigen::VectorXd y(3);
  y << 0.0, 1.0, 2.0;
  const ALDParams p{0.5, 1.0};
  const EPState st = run_ep(K, y, p, EPConfig{});
  CHECK(st.converged);
  const GridTruth truth = tensor_grid_truth(K, y, p, -6.0, 8.0, 160);
  CHECK(std::fabs(st.log_z_ep - truth.log_z) <= 0.05);
  CHECK((st.post_mean - truth.mean).cwiseAbs().maxCoeff() <= 0.05);
}

TEST_CASE("converged posterior satisfies the site-assembly identity") {
  Eigen::VectorXd x(8);
  x << 0.0, 0.25, 0.5, 0.75, 1.0, 1.4, 1.7, 2.0;
  const Eigen::MatrixXd K = se_kernel(x, 0.6, 1.3, 1e-8);
  Eigen::VectorXd y(8);
  y << 0.1, 0.9, 0.4, -0.6, -1.1, 0.3, 1.8, 0.7;
  const ALDParams p{0.8, 0.3};
  const EPState st = run_ep(K, y, p, EPConfig{});
  REQUIRE(st.converged);

  const int n = 8;
  Eigen::VectorXd w(n), nu(n);
  for (int i = 0; i < n; ++i) {
    w[i] = 1.0 / st.sites[static_cast<size_t>(i)].sigma2_tilde;
    nu[i] = st.sites[static_cast<size_t>(i)].mu_tilde * w[i];
  }
  const Eigen::MatrixXd Kinv = K.inverse();
  const Eigen::MatrixXd S_direct =
      (Kinv + Eigen::MatrixXd(w.asDiagonal())).inverse();
  const Eigen::VectorXd m_direct = S_direct * nu;
  CHECK((st.post_cov - S_direct).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((st.post_mean - m_direct).cwiseAbs().maxCoeff() <= 1e-8);

  // independent dense route to the same evidence value
  const Eigen::MatrixXd IKW =
      Eigen::MatrixXd::Identity(n, n) + K * Eigen::MatrixXd(w.asDiagonal());
  double sum_c = 0.0;
  for (int i = 0; i < n; ++i) {
    const SiteParams& s = st.sites[static_cast<size_t>(i)];
    sum_c += s.log_z_tilde -
             0.5 * (kLog2Pi + std::log(s.sigma2_tilde)) -
             s.mu_tilde * s.mu_tilde / (2.0 * s.sigma2_tilde);
  }
  const double direct =
      sum_c - 0.5 * std::log(IKW.determinant()) + 0.5 * nu.dot(S_direct * nu);
  CHECK(log_z_ep(st.sites, K) == doctest::Approx(direct).epsilon(1e-9));
  CHECK(st.log_z_ep == doctest::Approx(direct).epsilon(1e-9));
}

TEST_CASE("warm-started EP at the fixpoint stops immediately") {
  Eigen::VectorXd x(6);
  x << 0.0, 0.4, 0.8, 1.2, 1.6, 2.0;
  const Eigen::MatrixXd K = se_kernel(x, 0.7, 1.0, 1e-8);
  Eigen::VectorXd y(6);
  y << 0.2, -0.4, 0.9, 1.3, -0.2, 0.5;
  const ALDParams p{0.5, 0.4};
  const EPState first = run_ep(K, y, p, EPConfig{});
  REQUIRE(first.converged);
  const EPState second = run_ep(K, y, p, EPConfig{}, &first.sites);
  CHECK(second.converged);
  CHECK(second.sweeps == 1);
  CHECK((second.post_mean - first.post_mean).cwiseAbs().maxCoeff() <= 1e-5);
  CHECK(std::fabs(second.log_z_ep - first.log_z_ep) <= 1e-6);
}

TEST_CASE("EP fixpoint is permutation equivariant") {
  Eigen::VectorXd x(6);
  x << 0.0, 0.3, 0.9, 1.1, 1.6, 2.0;
  const Eigen::MatrixXd K = se_kernel(x, 0.5, 1.0, 1e-8);
  Eigen::VectorXd y(6);
  y << 1.0, -0.5, 0.3, 0.8, -1.2, 0.1;
  const ALDParams p{0.1, 0.5};
  EPConfig cfg;
  cfg.tol = 1e-8;
  cfg.max_sweeps = 300;
  const EPState a = run_ep(K, y, p, cfg);
  REQUIRE(a.converged);

  const int perm[6] = {4, 2, 0, 5, 1, 3};
  Eigen::MatrixXd Kp(6, 6);
  Eigen::VectorXd yp(6);
  for (int i = 0; i < 6; ++i) {
    yp[i] = y[perm[i]];
    for (int j = 0; j < 6; ++j) Kp(i, j) = K(perm[i], perm[j]);
  }
  const EPState b = run_ep(Kp, yp, p, cfg);
  REQUIRE(b.converged);
  CHECK(std::fabs(a.log_z_ep - b.log_z_ep) <= 1e-6);
  for (int i = 0; i < 6; ++i)
    CHECK(std::fabs(b.post_mean[i] - a.post_mean[perm[i]]) <= 1e-5);
}

TEST_CASE("scaling every site mass scales the evidence") {
  Eigen::VectorXd x(5);
  x << 0.0, 0.5, 1.0, 1.5, 2.0;
  const Eigen::MatrixXd K = se_kernel(x, 0.8, 1.1, 1e-8);
  Eigen::VectorXd y(5);
  y << 0.3, 0.8, -0.3, 0.6, -0.9;
  const EPState st = run_ep(K, y, ALDParams{0.6, 0.5}, EPConfig{});
  REQUIRE(st.converged);
  std::vector<SiteParams> doubled = st.sites;
  const double log2 = 0.6931471805599453;
  for (auto& s : doubled) s.log_z_tilde += log2;
  CHECK(log_z_ep(doubled, K) ==
        doctest::Approx(log_z_ep(st.sites, K) + 5.0 * log2).epsilon(1e-12));
}

TEST_CASE("flat sites integrate to the prior mass") {
  Eigen::VectorXd x(3);
  x << 0.0, 1.0, 2.0;
  const Eigen::MatrixXd K = se_kernel(x, 1.0, 2.0);
  std::vector<SiteParams> flat(3);
  CHECK(log_z_ep(flat, K) == 0.0);

  // one informative site among flat ones: Z = Z_1 N(mu_1 | 0, K_11 + s2_1)
  std::vector<SiteParams> mixed(3);
  mixed[1].log_z_tilde = -0.7;
  mixed[1].mu_tilde = 1.4;
  mixed[1].sigma2_tilde = 0.6;
  const double tot = K(1, 1) + 0.6;
  const double ref =
      -0.7 - 0.5 * (kLog2Pi + std::log(tot)) - 1.4 * 1.4 / (2.0 * tot);
  CHECK(log_z_ep(mixed, K) == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("far outliers drive clamped sites yet EP still converges") {
  Eigen::VectorXd x(4);
  x << 0.0, 0.3, 0.6, 0.9;
  const Eigen::MatrixXd K = se_kernel(x, 0.5, 1.0, 1e-8);
  Eigen::VectorXd y(4);
  y << 0.0, 0.1, -0.1, 50.0;
  const EPState st = run_ep(K, y, ALDParams{0.5, 0.05}, EPConfig{});
  CHECK(st.converged);
  CHECK(st.clamped_sites > 0);
  CHECK(st.post_mean.allFinite());
  CHECK(std::isfinite(st.log_z_ep));
  // the outlier still pulls its posterior marginal upward
  CHECK(st.post_mean[3] > st.post_mean[0]);
}

TEST_CASE("input validation") {
  Eigen::MatrixXd K(2, 2);
  K << 1.0, 0.2, 0.2, 1.0;
  Eigen::VectorXd y(2);
  y << 0.0, 1.0;
  const ALDParams p{0.5, 1.0};

  Eigen::MatrixXd bad(2, 3);
  bad.setZero();
  CHECK(thrown_code([&] { run_ep(bad, y, p, EPConfig{}); }) ==
        "dimension-mismatch");
  Eigen::VectorXd y3(3);
  y3.setZero();
  CHECK(thrown_code([&] { run_ep(K, y3, p, EPConfig{}); }) ==
        "dimension-mismatch");

  Eigen::MatrixXd indef(2, 2);
  indef << 1.0, 2.0, 2.0, 1.0;
  CHECK(thrown_code([&] { run_ep(indef, y, p, EPConfig{}); }) ==
        "ill-conditioned-kernel");

  EPConfig cfg;
  cfg.damping = 0.0;
  CHECK(thrown_code([&] { run_ep(K, y, p, cfg); }) == "invalid-argument");
  cfg = EPConfig{};
  cfg.tol = 0.0;
  CHECK(thrown_code([&] { run_ep(K, y, p, cfg); }) == "invalid-argument");

  std::vector<SiteParams> wrong(3);
  CHECK(thrown_code([&] { run_ep(K, y, p, EPConfig{}, &wrong); }) ==
        "dimension-mismatch");

  std::vector<SiteParams> sites(3);
  CHECK(thrown_code([&] { log_z_ep(sites, K); }) == "dimension-mismatch");
}
