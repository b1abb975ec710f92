#include "qgp/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "qgp/errors.hpp"
#include "qgp/special.hpp"

namespace qgp {

double pinball_mean(const Eigen::VectorXd& y, const Eigen::VectorXd& q_pred,
                    double tau) {
  require(y.size() == q_pred.size(), ErrorCode::dimension_mismatch,
          "pinball_mean: length mismatch");
  require(y.size() >= 1, ErrorCode::invalid_argument, "pinball_mean: empty");
  require(tau > 0.0 && tau < 1.0, ErrorCode::invalid_argument,
          "pinball_mean: tau must lie in (0, 1)");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    acc += tilted_loss(y[i] - q_pred[i], tau);
  return acc / static_cast<double>(y.size());
}

double coverage_indicator(const Eigen::VectorXd& y,
                          const Eigen::VectorXd& q_pred) {
  require(y.size() == q_pred.size(), ErrorCode::dimension_mismatch,
          "coverage_indicator: length mismatch");
  require(y.size() >= 1, ErrorCode::invalid_argument,
          "coverage_indicator: empty");
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y[i] <= q_pred[i]) ++count;
  return static_cast<double>(count) / static_cast<double>(y.size());
}

std::vector<ArdEntry> ard_ranking(const QuantileModel& model) {
  require(model.fitted(), ErrorCode::invalid_argument,
          "ard_ranking: model is not fitted");
  std::vector<ArdEntry> entries;
  const size_t d = model.kernel_params.lengthscales.size();
  for (size_t j = 0; j < d; ++j) {
    ArdEntry e;
    e.name = j < model.column_names.size() ? model.column_names[j]
                                           : "x" + std::to_string(j + 1);
    e.lengthscale = model.kernel_params.lengthscales[j];
    entries.push_back(std::move(e));
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const ArdEntry& a, const ArdEntry& b) {
                     return a.lengthscale < b.lengthscale;
                   });
  return entries;
}

CrossingReport detect_crossings(const std::vector<QuantileModel>& models,
                                const Eigen::MatrixXd& X_grid) {
  require(models.size() >= 2, ErrorCode::invalid_argument,
          "detect_crossings: need at least two models");
  for (size_t k = 0; k + 1 < models.size(); ++k)
    require(models[k].tau < models[k + 1].tau, ErrorCode::invalid_argument,
            "detect_crossings: models must have strictly increasing tau");
  for (const QuantileModel& m : models)
    require(m.input_dim() == models[0].input_dim(),
            ErrorCode::dimension_mismatch,
            "detect_crossings: models disagree on input dimension");

  std::vector<Eigen::VectorXd> preds;
  preds.reserve(models.size());
  for (const QuantileModel& m : models)
    preds.push_back(predict(m, X_grid).first);

  CrossingReport report;
  for (size_t k = 0; k + 1 < models.size(); ++k)
    for (Eigen::Index i = 0; i < X_grid.rows(); ++i) {
      const double margin = preds[k + 1][i] - preds[k][i];
      if (margin < 0.0)
        report.violations.push_back({static_cast<int>(i), models[k].tau,
                                     models[k + 1].tau, margin});
      else if (margin == 0.0)
        report.ties.push_back({static_cast<int>(i), models[k].tau,
                               models[k + 1].tau, margin});
    }
  return report;
}

double empirical_quantile(Eigen::VectorXd y, double tau) {
  require(y.size() >= 1, ErrorCode::invalid_argument,
          "empirical_quantile: empty input");
  require(tau > 0.0 && tau < 1.0, ErrorCode::invalid_argument,
          "empirical_quantile: tau must lie in (0, 1)");
  std::sort(y.data(), y.data() + y.size());
  const double h = tau * static_cast<double>(y.size() - 1);
  const Eigen::Index lo = static_cast<Eigen::Index>(std::floor(h));
  if (lo + 1 >= y.size()) return y[y.size() - 1];
  const double frac = h - static_cast<double>(lo);
  return y[lo] + frac * (y[lo + 1] - y[lo]);
}

double baseline_unconditional(const Eigen::VectorXd& y_train, double tau) {
  return empirical_quantile(y_train, tau);
}

Eigen::VectorXd LinearGaussianBaseline::predict(
    const Eigen::MatrixXd& X) const {
  require(X.cols() == coef.size(), ErrorCode::dimension_mismatch,
          "linear baseline: input dimension mismatch");
  const double offset = resid_sd * normal_quantile(tau);
  return (X * coef).array() + intercept + offset;
}

LinearGaussianBaseline baseline_linear_gaussian(const Dataset& data,
                                                double tau) {
  data.validate();
  require(tau > 0.0 && tau < 1.0, ErrorCode::invalid_argument,
          "baseline_linear_gaussian: tau must lie in (0, 1)");
  const Eigen::Index n = data.X.rows();
  const Eigen::Index d = data.X.cols();
  require(n > d + 1, ErrorCode::invalid_argument,
          "baseline_linear_gaussian: need more rows than coefficients");

  Eigen::MatrixXd design(n, d + 1);
  design.col(0).setOnes();
  design.rightCols(d) = data.X;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  require(qr.rank() == d + 1, ErrorCode::degenerate_data,
          "baseline_linear_gaussian: design matrix is rank deficient");
  const Eigen::VectorXd beta = qr.solve(data.y);
  const Eigen::VectorXd resid = data.y - design * beta;
  const double s2 = resid.squaredNorm() / static_cast<double>(n - d - 1);

  LinearGaussianBaseline out;
  out.intercept = beta[0];
  out.coef = beta.tail(d);
  out.resid_sd = std::sqrt(s2);
  out.tau = tau;
  return out;
}

}  // namespace qgp
