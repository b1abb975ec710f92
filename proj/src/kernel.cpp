#include "qgp/kernel.hpp"

#include <cmath>
#include <string>

#include "qgp/errors.hpp"

namespace qgp {

void KernelParams::validate(int expected_dim) const {
  require(static_cast<int>(lengthscales.size()) == expected_dim,
          ErrorCode::dimension_mismatch,
          "kernel: expected " + std::to_string(expected_dim) +
              " lengthscales, got " + std::to_string(lengthscales.size()));
  require(std::isfinite(amplitude) && amplitude > 0.0,
          ErrorCode::invalid_argument, "kernel: amplitude must be positive");
  for (double l : lengthscales)
    require(std::isfinite(l) && l > 0.0, ErrorCode::invalid_argument,
            "kernel: lengthscales must be positive");
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const KernelParams& params) {
  require(A.cols() == B.cols(), ErrorCode::dimension_mismatch,
          "covariance: input dimension mismatch");
  params.validate(static_cast<int>(A.cols()));

  // scale inputs once, then use the unit-lengthscale squared distance
  const int d = static_cast<int>(A.cols());
  Eigen::MatrixXd As = A, Bs = B;
  for (int j = 0; j < d; ++j) {
    const double inv = 1.0 / params.lengthscales[static_cast<size_t>(j)];
    As.col(j) *= inv;
    Bs.col(j) *= inv;
  }
  const double a2 = params.amplitude * params.amplitude;
  Eigen::MatrixXd K(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < As.rows(); ++i)
    for (Eigen::Index j = 0; j < Bs.rows(); ++j)
      K(i, j) = a2 * std::exp(-0.5 * (As.row(i) - Bs.row(j)).squaredNorm());
  return K;
}

Eigen::MatrixXd covariance_with_jitter(const Eigen::MatrixXd& X,
                                       const KernelParams& params,
                                       double jitter, double* jitter_used) {
  require(std::isfinite(jitter) && jitter >= 0.0, ErrorCode::invalid_argument,
          "covariance_with_jitter: jitter must be non-negative");
  Eigen::MatrixXd K = covariance(X, X, params);
  const double a2 = params.amplitude * params.amplitude;
  const double cap = 1e-4 * a2;
  double j = jitter * a2;
  while (true) {
    Eigen::MatrixXd Kj = K + j * Eigen::MatrixXd::Identity(X.rows(), X.rows());
    Eigen::LLT<Eigen::MatrixXd> llt(Kj);
    if (llt.info() == Eigen::Success) {
      if (jitter_used) *jitter_used = j / a2;
      return Kj;
    }
    if (j >= cap)
      fail(ErrorCode::ill_conditioned_kernel,
           "covariance_with_jitter: matrix not positive definite at maximum "
           "jitter");
    j = (j == 0.0) ? 1e-8 * a2 : j * 10.0;
    if (j > cap) j = cap;
  }
}

}  // namespace qgp
