#ifndef QGP_DATAGEN_HPP
#define QGP_DATAGEN_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace qgp {

struct Dataset {
  Eigen::MatrixXd X;                      // N x D inputs
  Eigen::VectorXd y;                      // N targets
  std::vector<std::string> column_names;  // D input names (may be empty)

  void validate() const;
};

// Column-wise affine transform fitted on training data: sample mean and
// sample (n-1) standard deviation per input column and for the response.
struct Standardizer {
  Eigen::VectorXd x_mean, x_std;
  double y_mean = 0.0, y_std = 1.0;
};

// Heteroscedastic chi-squared benchmark process:
//   x ~ U[0, 2],  y = sin(2 pi x) + sigma(x) (C - 2),  C ~ chi^2_1,
//   sigma(x) = sqrt((2.1 - x)/4).
// Deterministic for a fixed seed (counter-based generator, see rng.hpp).
Dataset synth_hetero_chi2(int n, std::uint64_t seed);

// Noise scale of the benchmark process.
double hetero_chi2_sigma(double x);

// Analytic tau-quantile of the benchmark process:
//   q_tau(x) = sin(2 pi x) + sigma(x) (Q_{chi2_1}(tau) - 2).
Eigen::VectorXd true_quantile_hetero_chi2(const Eigen::VectorXd& x,
                                          double tau);

// Fit a standardizer on `data` and return the transformed copy.
std::pair<Dataset, Standardizer> standardize(const Dataset& data);

Eigen::MatrixXd standardize_inputs(const Eigen::MatrixXd& X,
                                   const Standardizer& s);
Eigen::VectorXd destandardize_mean(const Eigen::VectorXd& mean_std,
                                   const Standardizer& s);
Eigen::VectorXd destandardize_variance(const Eigen::VectorXd& var_std,
                                       const Standardizer& s);

// Random partition of {0..n-1} into k disjoint folds with sizes differing by
// at most one.  Deterministic per seed.
std::vector<std::vector<int>> kfold_split(int n, int k, std::uint64_t seed);

// Among `candidates` uniformly random size-m subsets (nested streams: the
// j-th candidate depends only on (seed, j)), return the one maximizing the
// minimum pairwise Euclidean distance, with inputs linearly rescaled to
// [0, 1] per dimension first.  Ties keep the earliest candidate.
std::vector<int> maximin_subsample(const Dataset& data, int m, int candidates,
                                   std::uint64_t seed);

Dataset subset_rows(const Dataset& data, const std::vector<int>& rows);

// CSV with a header row; the named target column becomes y and the remaining
// columns become X in header order.
Dataset load_csv(const std::string& path, const std::string& target_column);
void save_csv(const Dataset& data, const std::string& path,
              const std::string& target_name = "y");

// Headered numeric CSV as a plain matrix (no target column semantics).
Eigen::MatrixXd load_csv_matrix(const std::string& path,
                                std::vector<std::string>* names = nullptr);

}  // namespace qgp

#endif
