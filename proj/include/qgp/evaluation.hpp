#ifndef QGP_EVALUATION_HPP
#define QGP_EVALUATION_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "qgp/datagen.hpp"
#include "qgp/model.hpp"

namespace qgp {

// Mean tilted (pinball) loss of predictions q_pred against targets y.
double pinball_mean(const Eigen::VectorXd& y, const Eigen::VectorXd& q_pred,
                    double tau);

// Fraction of targets at or below their predicted quantile; equals tau in
// expectation for a calibrated tau-quantile predictor.
double coverage_indicator(const Eigen::VectorXd& y,
                          const Eigen::VectorXd& q_pred);

// Inputs ranked by fitted lengthscale, ascending: the shortest lengthscale
// marks the most relevant input.  Meaningful when the fit pipeline rescaled
// inputs to equal ranges (the standardizer does).
struct ArdEntry {
  std::string name;
  double lengthscale;
};
std::vector<ArdEntry> ard_ranking(const QuantileModel& model);

// Quantile-crossing scan over a prediction grid for a family of models at
// strictly increasing tau.  A higher-tau prediction strictly below a
// lower-tau one is a violation; exact ties are reported separately as
// warnings.
struct Crossing {
  int grid_index;
  double tau_low, tau_high;
  double margin;  // q(tau_high) - q(tau_low); negative for violations
};
struct CrossingReport {
  std::vector<Crossing> violations;
  std::vector<Crossing> ties;
};
CrossingReport detect_crossings(const std::vector<QuantileModel>& models,
                                const Eigen::MatrixXd& X_grid);

// Empirical quantile with the linear-interpolation order-statistic rule
// h = (n-1) tau (the common "type 7" plotting position).
double empirical_quantile(Eigen::VectorXd y, double tau);

// Constant predictor at the empirical tau-quantile of the training targets.
double baseline_unconditional(const Eigen::VectorXd& y_train, double tau);

// Ordinary-least-squares fit with i.i.d. Gaussian residuals; the tau-quantile
// prediction is the OLS mean plus resid_sd * normal_quantile(tau).
struct LinearGaussianBaseline {
  double intercept = 0.0;
  Eigen::VectorXd coef;
  double resid_sd = 0.0;
  double tau = 0.5;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};
LinearGaussianBaseline baseline_linear_gaussian(const Dataset& data,
                                                double tau);

}  // namespace qgp

#endif
