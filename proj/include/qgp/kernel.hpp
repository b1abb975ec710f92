#ifndef QGP_KERNEL_HPP
#define QGP_KERNEL_HPP

#include <Eigen/Dense>
#include <vector>

namespace qgp {

// Squared-exponential kernel with one lengthscale per input dimension (ARD):
//   k(x, x') = amplitude^2 * exp(-1/2 * sum_d ((x_d - x'_d)/lengthscale_d)^2)
struct KernelParams {
  std::vector<double> lengthscales;  // one per input dimension, > 0
  double amplitude = 1.0;            // > 0

  void validate(int expected_dim) const;
};

// Dense covariance between row-sets A (n x d) and B (m x d).
Eigen::MatrixXd covariance(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const KernelParams& params);

// Symmetric covariance of X with `jitter * amplitude^2` added to the diagonal.
// If the Cholesky factorization still fails the jitter is escalated by factors
// of 10 up to 1e-4 * amplitude^2 before giving up with ill-conditioned-kernel.
// `jitter_used` (optional) reports the value that succeeded.
Eigen::MatrixXd covariance_with_jitter(const Eigen::MatrixXd& X,
                                       const KernelParams& params,
                                       double jitter,
                                       double* jitter_used = nullptr);

}  // namespace qgp

#endif
