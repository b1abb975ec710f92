#include "qgp/optim.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "qgp/errors.hpp"

namespace qgp {

NelderMeadResult nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const Eigen::VectorXd& x0, double step, double f_tol, double x_tol,
    int max_evals) {
  const int d = static_cast<int>(x0.size());
  require(d >= 1, ErrorCode::invalid_argument, "nelder_mead: empty start");
  require(step > 0.0 && f_tol > 0.0 && x_tol > 0.0 && max_evals >= d + 2,
          ErrorCode::invalid_argument, "nelder_mead: invalid settings");

  NelderMeadResult res;
  std::vector<Eigen::VectorXd> xs(static_cast<size_t>(d) + 1, x0);
  std::vector<double> fs(static_cast<size_t>(d) + 1);
  for (int i = 1; i <= d; ++i) xs[static_cast<size_t>(i)][i - 1] += step;
  for (int i = 0; i <= d; ++i) {
    fs[static_cast<size_t>(i)] = objective(xs[static_cast<size_t>(i)]);
    ++res.evals;
  }

  std::vector<int> order(static_cast<size_t>(d) + 1);
  const auto sort_simplex = [&] {
    for (int i = 0; i <= d; ++i) order[static_cast<size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return fs[static_cast<size_t>(a)] < fs[static_cast<size_t>(b)];
    });
  };

  while (res.evals < max_evals) {
    sort_simplex();
    const int best = order[0], worst = order[static_cast<size_t>(d)];
    const int second_worst = order[static_cast<size_t>(d) - 1];

    double diam = 0.0;
    for (int i = 0; i <= d; ++i)
      diam = std::max(
          diam, (xs[static_cast<size_t>(i)] - xs[static_cast<size_t>(best)])
                    .lpNorm<Eigen::Infinity>());
    if (fs[static_cast<size_t>(worst)] - fs[static_cast<size_t>(best)] <
            f_tol &&
        diam < x_tol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (int i = 0; i <= d; ++i)
      if (i != worst) centroid += xs[static_cast<size_t>(i)];
    centroid /= static_cast<double>(d);

    const auto eval = [&](const Eigen::VectorXd& x) {
      ++res.evals;
      return objective(x);
    };

    const Eigen::VectorXd& xw = xs[static_cast<size_t>(worst)];
    const Eigen::VectorXd xr = centroid + (centroid - xw);  // reflection
    const double fr = eval(xr);

    if (fr < fs[static_cast<size_t>(best)]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - xw);
      const double fe = eval(xe);
      if (fe < fr) {
        xs[static_cast<size_t>(worst)] = xe;
        fs[static_cast<size_t>(worst)] = fe;
      } else {
        xs[static_cast<size_t>(worst)] = xr;
        fs[static_cast<size_t>(worst)] = fr;
      }
    } else if (fr < fs[static_cast<size_t>(second_worst)]) {
      xs[static_cast<size_t>(worst)] = xr;
      fs[static_cast<size_t>(worst)] = fr;
    } else {
      // contract toward the better of (worst, reflected)
      const bool outside = fr < fs[static_cast<size_t>(worst)];
      const Eigen::VectorXd xc =
          outside ? centroid + 0.5 * (xr - centroid)
                  : centroid + 0.5 * (xw - centroid);
      const double fc = eval(xc);
      if (fc < std::min(fr, fs[static_cast<size_t>(worst)])) {
        xs[static_cast<size_t>(worst)] = xc;
        fs[static_cast<size_t>(worst)] = fc;
      } else {
        // shrink toward the best vertex
        for (int i = 0; i <= d; ++i) {
          if (i == best) continue;
          xs[static_cast<size_t>(i)] =
              xs[static_cast<size_t>(best)] +
              0.5 * (xs[static_cast<size_t>(i)] - xs[static_cast<size_t>(best)]);
          fs[static_cast<size_t>(i)] = eval(xs[static_cast<size_t>(i)]);
          if (res.evals >= max_evals) break;
        }
      }
    }
  }

  sort_simplex();
  res.x = xs[static_cast<size_t>(order[0])];
  res.f = fs[static_cast<size_t>(order[0])];
  return res;
}

}  // namespace qgp
