#include "qgp/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include "qgp/errors.hpp"
#include "qgp/rng.hpp"
#include "qgp/special.hpp"

namespace qgp {

void Dataset::validate() const {
  require(X.rows() == y.size(), ErrorCode::dimension_mismatch,
          "dataset: X rows and y length differ");
  require(X.rows() >= 1, ErrorCode::invalid_argument, "dataset: empty");
  require(X.allFinite() && y.allFinite(), ErrorCode::invalid_argument,
          "dataset: non-finite entries");
  require(column_names.empty() ||
              column_names.size() == static_cast<size_t>(X.cols()),
          ErrorCode::dimension_mismatch,
          "dataset: column name count mismatch");
}

double hetero_chi2_sigma(double x) { return std::sqrt((2.1 - x) / 4.0); }

Dataset synth_hetero_chi2(int n, std::uint64_t seed) {
  require(n >= 1, ErrorCode::invalid_argument,
          "synth_hetero_chi2: n must be >= 1");
  Dataset d;
  d.X.resize(n, 1);
  d.y.resize(n);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    // per row: one uniform for x, then two uniforms for the squared normal
    const double x = rng.uniform(0.0, 2.0);
    const double c = rng.chi2_1();
    d.X(i, 0) = x;
    d.y[i] = std::sin(2.0 * 3.141592653589793 * x) +
             hetero_chi2_sigma(x) * (c - 2.0);
  }
  d.column_names = {"x1"};
  return d;
}

Eigen::VectorXd true_quantile_hetero_chi2(const Eigen::VectorXd& x,
                                          double tau) {
  require(tau > 0.0 && tau < 1.0, ErrorCode::invalid_argument,
          "true_quantile_hetero_chi2: tau must lie in (0, 1)");
  const double qc = chi2_1_quantile(tau);
  Eigen::VectorXd q(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    q[i] = std::sin(2.0 * 3.141592653589793 * x[i]) +
           hetero_chi2_sigma(x[i]) * (qc - 2.0);
  return q;
}

namespace {

// sample mean and (n-1) standard deviation; refuses constant columns
std::pair<double, double> mean_std(const Eigen::VectorXd& v,
                                   const std::string& what) {
  require(v.size() >= 2, ErrorCode::degenerate_data,
          "standardize: need at least two rows to scale " + what);
  const double m = v.mean();
  const double ss = (v.array() - m).square().sum() /
                    static_cast<double>(v.size() - 1);
  const double sd = std::sqrt(ss);
  require(sd > 0.0, ErrorCode::degenerate_data,
          "standardize: " + what + " is constant");
  return {m, sd};
}

}  // namespace

std::pair<Dataset, Standardizer> standardize(const Dataset& data) {
  data.validate();
  const Eigen::Index d = data.X.cols();
  Standardizer s;
  s.x_mean.resize(d);
  s.x_std.resize(d);
  Dataset out = data;
  for (Eigen::Index j = 0; j < d; ++j) {
    auto [m, sd] =
        mean_std(data.X.col(j), "input column " + std::to_string(j + 1));
    s.x_mean[j] = m;
    s.x_std[j] = sd;
    out.X.col(j) = (data.X.col(j).array() - m) / sd;
  }
  auto [ym, ysd] = mean_std(data.y, "the target");
  s.y_mean = ym;
  s.y_std = ysd;
  out.y = (data.y.array() - ym) / ysd;
  return {out, s};
}

Eigen::MatrixXd standardize_inputs(const Eigen::MatrixXd& X,
                                   const Standardizer& s) {
  require(X.cols() == s.x_mean.size(), ErrorCode::dimension_mismatch,
          "standardize_inputs: expected " + std::to_string(s.x_mean.size()) +
              " columns, got " + std::to_string(X.cols()));
  Eigen::MatrixXd out = X;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    out.col(j) = (X.col(j).array() - s.x_mean[j]) / s.x_std[j];
  return out;
}

Eigen::VectorXd destandardize_mean(const Eigen::VectorXd& mean_std_units,
                                   const Standardizer& s) {
  return (mean_std_units.array() * s.y_std + s.y_mean).matrix();
}

Eigen::VectorXd destandardize_variance(const Eigen::VectorXd& var_std_units,
                                       const Standardizer& s) {
  return (var_std_units.array() * s.y_std * s.y_std).matrix();
}

std::vector<std::vector<int>> kfold_split(int n, int k, std::uint64_t seed) {
  require(k >= 1, ErrorCode::invalid_argument, "kfold_split: k must be >= 1");
  require(k <= n, ErrorCode::invalid_argument,
          "kfold_split: k exceeds the number of rows");
  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  // Fisher-Yates with rejection-free bounded draws (64-bit multiply-shift)
  for (int i = n - 1; i > 0; --i) {
    const std::uint64_t bound = static_cast<std::uint64_t>(i) + 1;
    const std::uint64_t j = static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(rng.next_u64()) * bound) >> 64);
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }
  std::vector<std::vector<int>> folds(static_cast<size_t>(k));
  const int base = n / k, extra = n % k;
  int pos = 0;
  for (int f = 0; f < k; ++f) {
    const int sz = base + (f < extra ? 1 : 0);
    folds[static_cast<size_t>(f)].assign(idx.begin() + pos,
                                         idx.begin() + pos + sz);
    pos += sz;
  }
  return folds;
}

std::vector<int> maximin_subsample(const Dataset& data, int m, int candidates,
                                   std::uint64_t seed) {
  data.validate();
  const int n = static_cast<int>(data.X.rows());
  require(m >= 1 && m <= n, ErrorCode::invalid_argument,
          "maximin_subsample: m must lie in [1, N]");
  require(candidates >= 1, ErrorCode::invalid_argument,
          "maximin_subsample: candidates must be >= 1");

  // rescale each input to [0, 1]; constant columns contribute nothing
  Eigen::MatrixXd Z = data.X;
  for (Eigen::Index j = 0; j < Z.cols(); ++j) {
    const double lo = Z.col(j).minCoeff(), hi = Z.col(j).maxCoeff();
    if (hi > lo)
      Z.col(j) = (Z.col(j).array() - lo) / (hi - lo);
    else
      Z.col(j).setZero();
  }

  std::vector<int> pool(static_cast<size_t>(n));
  std::vector<int> best;
  double best_dist = -1.0;
  for (int cand = 0; cand < candidates; ++cand) {
    // nested per-candidate streams: candidate j depends only on (seed, j)
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(cand));
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < m; ++i) {
      const std::uint64_t span = static_cast<std::uint64_t>(n - i);
      const std::uint64_t j = static_cast<std::uint64_t>(
          (static_cast<unsigned __int128>(rng.next_u64()) * span) >> 64);
      std::swap(pool[static_cast<size_t>(i)],
                pool[static_cast<size_t>(i) + static_cast<size_t>(j)]);
    }
    double min_sq = std::numeric_limits<double>::infinity();
    for (int a = 0; a < m && min_sq > 0.0; ++a)
      for (int b = a + 1; b < m; ++b) {
        const double d2 = (Z.row(pool[static_cast<size_t>(a)]) -
                           Z.row(pool[static_cast<size_t>(b)]))
                              .squaredNorm();
        if (d2 < min_sq) min_sq = d2;
        if (min_sq == 0.0) break;
      }
    if (m == 1) min_sq = std::numeric_limits<double>::infinity();
    if (min_sq > best_dist) {
      best_dist = min_sq;
      best.assign(pool.begin(), pool.begin() + m);
    }
  }
  if (best_dist == 0.0 && m > 1)
    std::cerr << "warning: maximin_subsample: duplicate inputs give minimum "
                 "distance 0 for every candidate; keeping the first\n";
  std::sort(best.begin(), best.end());
  return best;
}

Dataset subset_rows(const Dataset& data, const std::vector<int>& rows) {
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), data.X.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] >= 0 && rows[i] < data.X.rows(),
            ErrorCode::invalid_argument, "subset_rows: index out of range");
    out.X.row(static_cast<Eigen::Index>(i)) = data.X.row(rows[i]);
    out.y[static_cast<Eigen::Index>(i)] = data.y[rows[i]];
  }
  out.column_names = data.column_names;
  return out;
}

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // tolerate surrounding blanks and CR from foreign line endings
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ' ||
                             cell.back() == '\t'))
      cell.pop_back();
    size_t start = 0;
    while (start < cell.size() && (cell[start] == ' ' || cell[start] == '\t'))
      ++start;
    cells.push_back(cell.substr(start));
  }
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& target_column) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::io_error, "load_csv: cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::parse_error,
          "load_csv: " + path + " is empty");
  const std::vector<std::string> header = split_row(line);
  require(!header.empty(), ErrorCode::parse_error,
          "load_csv: " + path + " has an empty header");

  int target_idx = -1;
  for (size_t j = 0; j < header.size(); ++j)
    if (header[j] == target_column) target_idx = static_cast<int>(j);
  require(target_idx >= 0, ErrorCode::missing_target,
          "load_csv: target column '" + target_column + "' not found in " +
              path);

  const int ncols = static_cast<int>(header.size());
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_row(line);
    require(static_cast<int>(cells.size()) == ncols, ErrorCode::parse_error,
            "load_csv: line " + std::to_string(lineno) + " has " +
                std::to_string(cells.size()) + " cells, expected " +
                std::to_string(ncols));
    std::vector<double> vals(static_cast<size_t>(ncols));
    for (int j = 0; j < ncols; ++j) {
      const std::string& c = cells[static_cast<size_t>(j)];
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      require(!c.empty() && end == c.c_str() + c.size() && std::isfinite(v),
              ErrorCode::parse_error,
              "load_csv: non-numeric cell at line " + std::to_string(lineno) +
                  ", column '" + header[static_cast<size_t>(j)] + "'");
      vals[static_cast<size_t>(j)] = v;
    }
    rows.push_back(std::move(vals));
  }
  require(!rows.empty(), ErrorCode::parse_error,
          "load_csv: " + path + " has no data rows");

  Dataset d;
  const int nrows = static_cast<int>(rows.size());
  d.X.resize(nrows, ncols - 1);
  d.y.resize(nrows);
  for (int j = 0, xj = 0; j < ncols; ++j) {
    if (j == target_idx) continue;
    d.column_names.push_back(header[static_cast<size_t>(j)]);
    for (int i = 0; i < nrows; ++i)
      d.X(i, xj) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    ++xj;
  }
  for (int i = 0; i < nrows; ++i)
    d.y[i] = rows[static_cast<size_t>(i)][static_cast<size_t>(target_idx)];
  d.validate();
  return d;
}

Eigen::MatrixXd load_csv_matrix(const std::string& path,
                                std::vector<std::string>* names) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::io_error,
          "load_csv_matrix: cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::parse_error,
          "load_csv_matrix: " + path + " is empty");
  const std::vector<std::string> header = split_row(line);
  const int ncols = static_cast<int>(header.size());
  require(ncols >= 1, ErrorCode::parse_error,
          "load_csv_matrix: " + path + " has an empty header");
  if (names) *names = header;

  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_row(line);
    require(static_cast<int>(cells.size()) == ncols, ErrorCode::parse_error,
            "load_csv_matrix: line " + std::to_string(lineno) + " has " +
                std::to_string(cells.size()) + " cells, expected " +
                std::to_string(ncols));
    std::vector<double> vals(static_cast<size_t>(ncols));
    for (int j = 0; j < ncols; ++j) {
      const std::string& c = cells[static_cast<size_t>(j)];
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      require(!c.empty() && end == c.c_str() + c.size() && std::isfinite(v),
              ErrorCode::parse_error,
              "load_csv_matrix: non-numeric cell at line " +
                  std::to_string(lineno) + ", column '" +
                  header[static_cast<size_t>(j)] + "'");
      vals[static_cast<size_t>(j)] = v;
    }
    rows.push_back(std::move(vals));
  }
  require(!rows.empty(), ErrorCode::parse_error,
          "load_csv_matrix: " + path + " has no data rows");
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), ncols);
  for (size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < ncols; ++j)
      M(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<size_t>(j)];
  return M;
}

void save_csv(const Dataset& data, const std::string& path,
              const std::string& target_name) {
  data.validate();
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::io_error, "save_csv: cannot write " + path);
  const Eigen::Index dcols = data.X.cols();
  for (Eigen::Index j = 0; j < dcols; ++j) {
    const std::string name =
        data.column_names.empty() ? "x" + std::to_string(j + 1)
                                  : data.column_names[static_cast<size_t>(j)];
    out << name << ",";
  }
  out << target_name << "\n";
  char buf[40];
  for (Eigen::Index i = 0; i < data.X.rows(); ++i) {
    for (Eigen::Index j = 0; j < dcols; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.X(i, j));
      out << buf << ",";
    }
    std::snprintf(buf, sizeof buf, "%.17g", data.y[i]);
    out << buf << "\n";
  }
  require(out.good(), ErrorCode::io_error, "save_csv: write failed for " + path);
}

}  // namespace qgp
