#include "qgp/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "qgp/errors.hpp"
#include "qgp/optim.hpp"
#include "qgp/rng.hpp"

namespace qgp {

namespace {

using json = nlohmann::ordered_json;

// theta layout: [log l_1 .. log l_D, log amplitude, log sigma]
constexpr double kLogSigmaFloor = -6.907755278982137;  // log(1e-3), std units
constexpr double kThetaBound = 30.0;

KernelParams kernel_of_theta(const Eigen::VectorXd& theta, int d) {
  KernelParams kp;
  kp.lengthscales.resize(static_cast<size_t>(d));
  for (int j = 0; j < d; ++j)
    kp.lengthscales[static_cast<size_t>(j)] = std::exp(theta[j]);
  kp.amplitude = std::exp(theta[d]);
  return kp;
}

struct EvalResult {
  double value = 0.0;
  bool ep_ok = false;        // EP ran and converged
  EPState state;
  double jitter_used = 0.0;
};

// One objective evaluation: negative log expected utility plus a smooth
// penalty below the sigma floor.  Failures map to large finite values so the
// simplex backs away instead of aborting the search.
EvalResult eval_theta(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      double tau, const Eigen::VectorXd& theta,
                      const EPConfig& ep_config,
                      const std::vector<SiteParams>* warm) {
  EvalResult out;
  const int d = static_cast<int>(X.cols());
  if (!theta.allFinite() || theta.lpNorm<Eigen::Infinity>() > kThetaBound) {
    out.value = 1e10 + (theta.allFinite() ? theta.squaredNorm() : 0.0);
    return out;
  }
  double log_sigma = theta[d + 1];
  double penalty = 0.0;
  if (log_sigma < kLogSigmaFloor) {
    const double gap = kLogSigmaFloor - log_sigma;
    penalty = 1e4 * gap * gap;
    log_sigma = kLogSigmaFloor;
  }
  try {
    const KernelParams kp = kernel_of_theta(theta, d);
    const Eigen::MatrixXd K =
        covariance_with_jitter(X, kp, ep_config.jitter, &out.jitter_used);
    ALDParams ald;
    ald.tau = tau;
    ald.sigma = std::exp(log_sigma);
    out.state = run_ep(K, y, ald, ep_config, warm);
    out.ep_ok = out.state.converged;
    out.value = -out.state.log_z_ep + penalty;
    if (!std::isfinite(out.value)) {
      out.value = 1e9;
      out.ep_ok = false;
    }
  } catch (const Error&) {
    out.value = 1e9;
    out.ep_ok = false;
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vector_from_json(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  Eigen::Index i = 0;
  for (const auto& x : a) v[i++] = x.get<double>();
  return v;
}

}  // namespace

double fit_objective(const Eigen::MatrixXd& X_std,
                     const Eigen::VectorXd& y_std, double tau,
                     const Eigen::VectorXd& theta, const EPConfig& ep_config) {
  require(theta.size() == X_std.cols() + 2, ErrorCode::dimension_mismatch,
          "fit_objective: theta must have D+2 entries");
  return eval_theta(X_std, y_std, tau, theta, ep_config, nullptr).value;
}

QuantileModel fit(const Dataset& data, double tau, const OptConfig& config) {
  data.validate();
  require(data.X.rows() >= 5, ErrorCode::invalid_argument,
          "fit: need at least 5 rows");
  require(tau > 0.0 && tau < 1.0, ErrorCode::invalid_argument,
          "fit: tau must lie in (0, 1)");
  require(config.restarts >= 1 && config.max_evals >= 10 && config.tol > 0.0,
          ErrorCode::invalid_argument, "fit: invalid optimizer config");

  auto [std_data, stdzr] = standardize(data);
  const Eigen::MatrixXd& X = std_data.X;
  const Eigen::VectorXd& y = std_data.y;
  const int d = static_cast<int>(X.cols());
  const int dim = d + 2;

  Eigen::VectorXd log_range(d);
  for (int j = 0; j < d; ++j) {
    const double r = X.col(j).maxCoeff() - X.col(j).minCoeff();
    log_range[j] = std::log(r);
  }

  QuantileModel model;
  model.tau = tau;
  model.standardizer = stdzr;
  model.fit_report.restarts.reserve(static_cast<size_t>(config.restarts));

  for (int r = 0; r < config.restarts; ++r) {
    Rng rng = Rng::substream(config.seed, static_cast<std::uint64_t>(r));
    Eigen::VectorXd theta0(dim);
    // log-uniform draws: l_d in [0.05, 5] * input range, a in [0.1, 10],
    // sigma in [0.01, 1] (y is standardized, so std(y) = 1)
    for (int j = 0; j < d; ++j)
      theta0[j] = log_range[j] + std::log(0.05) +
                  rng.uniform() * std::log(5.0 / 0.05);
    theta0[d] = std::log(0.1) + rng.uniform() * std::log(10.0 / 0.1);
    theta0[d + 1] = std::log(0.01) + rng.uniform() * std::log(1.0 / 0.01);

    // Search-time EP runs at a loosened tolerance: simplex comparisons only
    // need ~1e-4 accuracy, and the recorded objective below comes from a
    // strict cold evaluation anyway.
    EPConfig search_cfg = config.ep;
    search_cfg.tol = std::max(config.ep.tol, 1e-4);

    // warm-start EP across nearby objective evaluations within this restart
    std::vector<SiteParams> warm_sites;
    Eigen::VectorXd warm_theta;
    bool have_warm = false;
    const auto objective = [&](const Eigen::VectorXd& theta) {
      const bool close =
          have_warm &&
          (theta - warm_theta).lpNorm<Eigen::Infinity>() < 0.1;
      const EvalResult ev = eval_theta(X, y, tau, theta, search_cfg,
                                       close ? &warm_sites : nullptr);
      if (ev.ep_ok) {
        warm_sites = ev.state.sites;
        warm_theta = theta;
        have_warm = true;
      }
      return ev.value;
    };

    const NelderMeadResult nm =
        nelder_mead(objective, theta0, 0.4, config.tol, 0.02,
                    config.max_evals);

    // cold re-run at the winner: the recorded objective and EP status come
    // from a warm-start-free evaluation with a doubled sweep budget
    EPConfig final_cfg = config.ep;
    final_cfg.max_sweeps *= 2;
    const EvalResult fin = eval_theta(X, y, tau, nm.x, final_cfg, nullptr);

    RestartTrace trace;
    trace.theta_init = theta0;
    trace.theta_final = nm.x;
    trace.objective = fin.value;
    trace.evals = nm.evals;
    trace.opt_converged = nm.converged;
    trace.ep_converged = fin.ep_ok;
    model.fit_report.restarts.push_back(std::move(trace));
  }

  // best objective among restarts whose final EP converged
  std::vector<int> idx(model.fit_report.restarts.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return model.fit_report.restarts[static_cast<size_t>(a)].objective <
           model.fit_report.restarts[static_cast<size_t>(b)].objective;
  });
  int chosen = -1;
  for (int i : idx)
    if (model.fit_report.restarts[static_cast<size_t>(i)].ep_converged) {
      chosen = i;
      break;
    }
  if (chosen < 0) {
    std::ostringstream msg;
    msg << "fit: EP failed to converge at the optimum of every restart (best "
           "objectives:";
    for (int i : idx)
      msg << " "
          << model.fit_report.restarts[static_cast<size_t>(i)].objective;
    msg << ")";
    fail(ErrorCode::fit_failure, msg.str());
  }
  model.fit_report.chosen = chosen;

  const Eigen::VectorXd& theta =
      model.fit_report.restarts[static_cast<size_t>(chosen)].theta_final;
  model.kernel_params = kernel_of_theta(theta, d);
  model.ald_sigma = std::exp(std::max(theta[d + 1], kLogSigmaFloor));
  model.X_train = X;
  model.column_names = data.column_names;

  EPConfig final_cfg = config.ep;
  final_cfg.max_sweeps *= 2;
  const Eigen::MatrixXd K = covariance_with_jitter(
      model.X_train, model.kernel_params, final_cfg.jitter, &model.jitter);
  ALDParams ald;
  ald.tau = tau;
  ald.sigma = model.ald_sigma;
  model.ep_state = run_ep(K, y, ald, final_cfg, nullptr);
  return model;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> predict(
    const QuantileModel& model, const Eigen::MatrixXd& X_star) {
  require(model.fitted(), ErrorCode::invalid_argument,
          "predict: model is not fitted");
  require(X_star.cols() == model.X_train.cols(), ErrorCode::dimension_mismatch,
          "predict: model expects " + std::to_string(model.X_train.cols()) +
              " input columns, got " + std::to_string(X_star.cols()));
  require(X_star.allFinite(), ErrorCode::invalid_argument,
          "predict: non-finite inputs");

  const Eigen::Index n = model.X_train.rows();
  const Eigen::MatrixXd Xs = standardize_inputs(X_star, model.standardizer);
  const double a2 =
      model.kernel_params.amplitude * model.kernel_params.amplitude;

  Eigen::MatrixXd K = covariance(model.X_train, model.X_train,
                                 model.kernel_params);
  K.diagonal().array() += model.jitter * a2;
  const Eigen::MatrixXd K_star =
      covariance(model.X_train, Xs, model.kernel_params);

  Eigen::VectorXd t(n), nu(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const SiteParams& s = model.ep_state.sites[static_cast<size_t>(i)];
    require(s.sigma2_tilde > 0.0 && std::isfinite(s.sigma2_tilde),
            ErrorCode::invalid_argument,
            "predict: model has unfitted (non-finite) sites");
    t[i] = 1.0 / s.sigma2_tilde;
    nu[i] = s.mu_tilde / s.sigma2_tilde;
  }
  const Eigen::VectorXd ws = t.cwiseSqrt();
  Eigen::MatrixXd B = ws.asDiagonal() * K * ws.asDiagonal();
  B.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(B);
  require(llt.info() == Eigen::Success, ErrorCode::ill_conditioned_kernel,
          "predict: posterior system factorization failed");

  // (K + Sigma~)^{-1} mu~ = nu - W^{1/2} B^{-1} W^{1/2} K nu
  const Eigen::VectorXd z =
      nu - ws.asDiagonal() * llt.solve(ws.asDiagonal() * (K * nu));
  Eigen::VectorXd mean_std = K_star.transpose() * z;

  const Eigen::MatrixXd Vb =
      llt.matrixL().solve(ws.asDiagonal() * K_star);  // L^{-1} W^{1/2} k_*
  Eigen::VectorXd var_std(Xs.rows());
  for (Eigen::Index j = 0; j < Xs.rows(); ++j) {
    const double v = a2 - Vb.col(j).squaredNorm();
    var_std[j] = std::max(v, 1e-14 * a2);  // guard rounding at interpolation
  }

  return {destandardize_mean(mean_std, model.standardizer),
          destandardize_variance(var_std, model.standardizer)};
}

void save_model(const QuantileModel& model, const std::string& path) {
  require(model.fitted(), ErrorCode::invalid_argument,
          "save_model: model is not fitted");
  json sites = json::object();
  json lz = json::array(), mu = json::array(), s2 = json::array();
  for (const SiteParams& s : model.ep_state.sites) {
    require(std::isfinite(s.sigma2_tilde), ErrorCode::invalid_argument,
            "save_model: cannot persist a model with flat sites");
    lz.push_back(s.log_z_tilde);
    mu.push_back(s.mu_tilde);
    s2.push_back(s.sigma2_tilde);
  }
  sites["log_z_tilde"] = lz;
  sites["mu_tilde"] = mu;
  sites["sigma2_tilde"] = s2;

  json xt = json::object();
  xt["rows"] = model.X_train.rows();
  xt["cols"] = model.X_train.cols();
  json xd = json::array();
  for (Eigen::Index i = 0; i < model.X_train.rows(); ++i)
    for (Eigen::Index j = 0; j < model.X_train.cols(); ++j)
      xd.push_back(model.X_train(i, j));
  xt["data"] = xd;

  json kp = json::object();
  kp["lengthscales"] = model.kernel_params.lengthscales;
  kp["amplitude"] = model.kernel_params.amplitude;

  json st = json::object();
  st["x_mean"] = vector_to_json(model.standardizer.x_mean);
  st["x_std"] = vector_to_json(model.standardizer.x_std);
  st["y_mean"] = model.standardizer.y_mean;
  st["y_std"] = model.standardizer.y_std;

  json ep = json::object();
  ep["sites"] = sites;
  ep["log_z_ep"] = model.ep_state.log_z_ep;
  ep["sweeps"] = model.ep_state.sweeps;
  ep["converged"] = model.ep_state.converged;

  json restarts = json::array();
  for (const RestartTrace& t : model.fit_report.restarts) {
    json r = json::object();
    r["theta_init"] = vector_to_json(t.theta_init);
    r["theta_final"] = vector_to_json(t.theta_final);
    r["objective"] = t.objective;
    r["evals"] = t.evals;
    r["opt_converged"] = t.opt_converged;
    r["ep_converged"] = t.ep_converged;
    restarts.push_back(r);
  }
  json report = json::object();
  report["chosen"] = model.fit_report.chosen;
  report["restarts"] = restarts;

  json payload = json::object();
  payload["tau"] = model.tau;
  payload["ald_sigma"] = model.ald_sigma;
  payload["jitter"] = model.jitter;
  payload["column_names"] = model.column_names;
  payload["kernel_params"] = kp;
  payload["x_train"] = xt;
  payload["standardizer"] = st;
  payload["ep_state"] = ep;
  payload["fit_report"] = report;

  json file = json::object();
  file["format"] = "qgp-quantile-model";
  file["version"] = 1;
  file["checksum"] = hex64(fnv1a64(payload.dump()));
  file["payload"] = payload;

  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::io_error, "save_model: cannot write " + path);
  out << file.dump(1) << "\n";
  require(out.good(), ErrorCode::io_error,
          "save_model: write failed for " + path);
}

QuantileModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::io_error, "load_model: cannot open " + path);
  json file;
  try {
    in >> file;
  } catch (const std::exception& e) {
    fail(ErrorCode::corrupt_model,
         "load_model: " + path + " is not parseable: " + e.what());
  }
  try {
    require(file.at("format").get<std::string>() == "qgp-quantile-model" &&
                file.at("version").get<int>() == 1,
            ErrorCode::corrupt_model,
            "load_model: unknown format or version in " + path);
    const json& payload = file.at("payload");
    require(file.at("checksum").get<std::string>() ==
                hex64(fnv1a64(payload.dump())),
            ErrorCode::corrupt_model, "load_model: checksum mismatch in " + path);

    QuantileModel m;
    m.tau = payload.at("tau").get<double>();
    m.ald_sigma = payload.at("ald_sigma").get<double>();
    m.jitter = payload.at("jitter").get<double>();
    m.column_names =
        payload.at("column_names").get<std::vector<std::string>>();
    m.kernel_params.lengthscales =
        payload.at("kernel_params").at("lengthscales")
            .get<std::vector<double>>();
    m.kernel_params.amplitude =
        payload.at("kernel_params").at("amplitude").get<double>();

    const json& xt = payload.at("x_train");
    const Eigen::Index rows = xt.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = xt.at("cols").get<Eigen::Index>();
    const json& xd = xt.at("data");
    require(static_cast<Eigen::Index>(xd.size()) == rows * cols,
            ErrorCode::corrupt_model,
            "load_model: x_train size mismatch in " + path);
    m.X_train.resize(rows, cols);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j)
        m.X_train(i, j) = xd.at(static_cast<size_t>(k++)).get<double>();

    const json& st = payload.at("standardizer");
    m.standardizer.x_mean = vector_from_json(st.at("x_mean"));
    m.standardizer.x_std = vector_from_json(st.at("x_std"));
    m.standardizer.y_mean = st.at("y_mean").get<double>();
    m.standardizer.y_std = st.at("y_std").get<double>();

    const json& ep = payload.at("ep_state");
    const json& sites = ep.at("sites");
    const auto slz = sites.at("log_z_tilde").get<std::vector<double>>();
    const auto smu = sites.at("mu_tilde").get<std::vector<double>>();
    const auto ss2 = sites.at("sigma2_tilde").get<std::vector<double>>();
    require(slz.size() == smu.size() && smu.size() == ss2.size() &&
                static_cast<Eigen::Index>(slz.size()) == rows,
            ErrorCode::corrupt_model,
            "load_model: site array size mismatch in " + path);
    m.ep_state.sites.resize(slz.size());
    for (size_t i = 0; i < slz.size(); ++i) {
      m.ep_state.sites[i].log_z_tilde = slz[i];
      m.ep_state.sites[i].mu_tilde = smu[i];
      m.ep_state.sites[i].sigma2_tilde = ss2[i];
    }
    m.ep_state.log_z_ep = ep.at("log_z_ep").get<double>();
    m.ep_state.sweeps = ep.at("sweeps").get<int>();
    m.ep_state.converged = ep.at("converged").get<bool>();

    const json& report = payload.at("fit_report");
    m.fit_report.chosen = report.at("chosen").get<int>();
    for (const json& r : report.at("restarts")) {
      RestartTrace t;
      t.theta_init = vector_from_json(r.at("theta_init"));
      t.theta_final = vector_from_json(r.at("theta_final"));
      t.objective = r.at("objective").get<double>();
      t.evals = r.at("evals").get<int>();
      t.opt_converged = r.at("opt_converged").get<bool>();
      t.ep_converged = r.at("ep_converged").get<bool>();
      m.fit_report.restarts.push_back(std::move(t));
    }

    require(m.tau > 0.0 && m.tau < 1.0 && m.ald_sigma > 0.0,
            ErrorCode::corrupt_model,
            "load_model: parameters out of range in " + path);
    m.kernel_params.validate(static_cast<int>(cols));

    // rebuild the posterior summary from the persisted sites
    Eigen::MatrixXd K = covariance(m.X_train, m.X_train, m.kernel_params);
    K.diagonal().array() +=
        m.jitter * m.kernel_params.amplitude * m.kernel_params.amplitude;
    m.ep_state.post_mean.resize(rows);
    m.ep_state.post_cov.resize(rows, rows);
    Eigen::VectorXd t(rows), nu(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
      t[i] = 1.0 / m.ep_state.sites[static_cast<size_t>(i)].sigma2_tilde;
      nu[i] = m.ep_state.sites[static_cast<size_t>(i)].mu_tilde * t[i];
    }
    const Eigen::VectorXd ws = t.cwiseSqrt();
    Eigen::MatrixXd B = ws.asDiagonal() * K * ws.asDiagonal();
    B.diagonal().array() += 1.0;
    Eigen::LLT<Eigen::MatrixXd> llt(B);
    require(llt.info() == Eigen::Success, ErrorCode::corrupt_model,
            "load_model: persisted sites give a non-factorizable posterior");
    const Eigen::MatrixXd V = llt.matrixL().solve(ws.asDiagonal() * K);
    m.ep_state.post_cov = K - V.transpose() * V;
    m.ep_state.post_mean = m.ep_state.post_cov * nu;
    return m;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorCode::corrupt_model,
         "load_model: " + path + " is malformed: " + e.what());
  }
}

}  // namespace qgp
