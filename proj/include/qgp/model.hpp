#ifndef QGP_MODEL_HPP
#define QGP_MODEL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qgp/datagen.hpp"
#include "qgp/ep.hpp"
#include "qgp/kernel.hpp"

namespace qgp {

struct OptConfig {
  int restarts = 5;
  int max_evals = 500;  // objective evaluations per restart
  std::uint64_t seed = 0;
  double tol = 1e-5;    // objective-spread stopping tolerance
  EPConfig ep;          // EP settings used inside the objective
};

struct RestartTrace {
  Eigen::VectorXd theta_init;   // log-parameters at the restart's start
  Eigen::VectorXd theta_final;  // best log-parameters found
  double objective = 0.0;       // negative log expected utility
  int evals = 0;
  bool opt_converged = false;
  bool ep_converged = false;    // EP status at theta_final (cold start)
};

struct FitReport {
  std::vector<RestartTrace> restarts;
  int chosen = -1;  // index of the accepted restart
};

// A fitted quantile model.  All training-side quantities (X_train, ep_state,
// kernel amplitude/lengthscales, ald_sigma) live in standardized units; the
// standardizer maps predictions back to the original ones.
struct QuantileModel {
  double tau = 0.5;
  KernelParams kernel_params;
  double ald_sigma = 1.0;
  double jitter = 0.0;  // relative diagonal jitter the training K was built with
  Eigen::MatrixXd X_train;
  EPState ep_state;
  Standardizer standardizer;
  FitReport fit_report;
  std::vector<std::string> column_names;  // input names from the training data

  bool fitted() const { return X_train.rows() > 0; }
  int input_dim() const { return static_cast<int>(X_train.cols()); }
};

// Negative log expected utility at log-parameters theta = (log lengthscales,
// log amplitude, log sigma) for standardized data, from a cold-started EP
// run.  This is exactly the function `fit` minimizes.
double fit_objective(const Eigen::MatrixXd& X_std, const Eigen::VectorXd& y_std,
                     double tau, const Eigen::VectorXd& theta,
                     const EPConfig& ep_config);

// Hyperparameter search (multi-restart downhill simplex over log-parameters)
// followed by a cold EP re-run at the winning parameters.  Restarts whose
// final EP does not converge are rejected in favor of the next best.
QuantileModel fit(const Dataset& data, double tau, const OptConfig& config);

// Predictive mean and variance of the latent quantile at new inputs, in
// original units.
std::pair<Eigen::VectorXd, Eigen::VectorXd> predict(
    const QuantileModel& model, const Eigen::MatrixXd& X_star);

// Versioned, checksummed persistence.  Round trip is bit-exact: a loaded
// model predicts identically to the saved one.
void save_model(const QuantileModel& model, const std::string& path);
QuantileModel load_model(const std::string& path);

}  // namespace qgp

#endif
