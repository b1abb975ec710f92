#ifndef QGP_OPTIM_HPP
#define QGP_OPTIM_HPP

#include <Eigen/Dense>
#include <functional>

namespace qgp {

struct NelderMeadResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int evals = 0;
  bool converged = false;  // objective spread and simplex diameter below tol
};

// Downhill-simplex minimization (reflect / expand / contract / shrink with
// the classic coefficients).  Stops when both the objective spread and the
// simplex diameter fall below their tolerances, or after max_evals objective
// evaluations.  Deterministic for deterministic objectives.
NelderMeadResult nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const Eigen::VectorXd& x0, double step, double f_tol, double x_tol,
    int max_evals);

}  // namespace qgp

#endif
