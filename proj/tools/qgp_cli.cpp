// qgp: command-line front end for quantile Gaussian-process regression.
//
// Subcommands:
//   synth    generate the heteroscedastic chi-squared benchmark as CSV
//   fit      train a quantile model on a CSV and save it
//   predict  predict quantile mean/variance on a grid or a CSV
//   cv       k-fold cross-validated pinball loss, with optional baselines
//   eval     coverage, lengthscale ranking, and crossing report for models
//
// All output is deterministic for fixed flags (including --seed).  Reports
// print numbers with 9 significant digits; data CSVs written by `synth` use
// full precision (see save_csv).  Errors go to stderr as
// "error: <category>: <message>" and exit 1; flag/usage problems exit 2.

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "qgp/datagen.hpp"
#include "qgp/ep.hpp"
#include "qgp/errors.hpp"
#include "qgp/evaluation.hpp"
#include "qgp/model.hpp"
#include "qgp/parallel.hpp"
#include "qgp/rng.hpp"

namespace {

std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// --config: a JSON file that can set every EP / optimizer field; explicit
// command-line flags override whatever the file sets.

void apply_config_file(const std::string& path, qgp::OptConfig* cfg) {
  std::ifstream in(path, std::ios::binary);
  qgp::require(in.good(), qgp::ErrorCode::io_error,
               "config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    qgp::fail(qgp::ErrorCode::parse_error,
              std::string("config: invalid JSON: ") + e.what());
  }
  qgp::require(j.is_object(), qgp::ErrorCode::parse_error,
               "config: top level must be an object");
  try {
    for (const auto& [key, val] : j.items()) {
      if (key == "ep") {
        qgp::require(val.is_object(), qgp::ErrorCode::parse_error,
                     "config: \"ep\" must be an object");
        for (const auto& [k2, v2] : val.items()) {
          if (k2 == "tol") cfg->ep.tol = v2.get<double>();
          else if (k2 == "max_sweeps") cfg->ep.max_sweeps = v2.get<int>();
          else if (k2 == "damping") cfg->ep.damping = v2.get<double>();
          else if (k2 == "max_skip_fraction")
            cfg->ep.max_skip_fraction = v2.get<double>();
          else if (k2 == "jitter") cfg->ep.jitter = v2.get<double>();
          else
            qgp::fail(qgp::ErrorCode::parse_error,
                      "config: unknown key \"ep." + k2 + "\"");
        }
      } else if (key == "opt") {
        qgp::require(val.is_object(), qgp::ErrorCode::parse_error,
                     "config: \"opt\" must be an object");
        for (const auto& [k2, v2] : val.items()) {
          if (k2 == "restarts") cfg->restarts = v2.get<int>();
          else if (k2 == "max_evals") cfg->max_evals = v2.get<int>();
          else if (k2 == "tol") cfg->tol = v2.get<double>();
          else if (k2 == "seed") cfg->seed = v2.get<std::uint64_t>();
          else
            qgp::fail(qgp::ErrorCode::parse_error,
                      "config: unknown key \"opt." + k2 + "\"");
        }
      } else {
        qgp::fail(qgp::ErrorCode::parse_error,
                  "config: unknown key \"" + key + "\"");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    qgp::fail(qgp::ErrorCode::parse_error,
              std::string("config: bad value type: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(int n, std::uint64_t seed, const std::string& out) {
  const qgp::Dataset data = qgp::synth_hetero_chi2(n, seed);
  qgp::save_csv(data, out, "y");
  std::printf("synth: n=%d seed=%llu out=%s\n", n,
              static_cast<unsigned long long>(seed), out.c_str());
  std::printf("x_range: [%s, %s]\n", fmt9(data.X.col(0).minCoeff()).c_str(),
              fmt9(data.X.col(0).maxCoeff()).c_str());
  std::printf("y_range: [%s, %s]\n", fmt9(data.y.minCoeff()).c_str(),
              fmt9(data.y.maxCoeff()).c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string data_path;
  std::string target = "y";
  double tau = 0.5;
  int restarts = 0;
  bool restarts_set = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_model;
  std::string config_path;
  int subsample = 0;
  int subsample_candidates = 1000;
};

int cmd_fit(const FitArgs& a) {
  qgp::Dataset data = qgp::load_csv(a.data_path, a.target);

  qgp::OptConfig cfg;
  if (!a.config_path.empty()) apply_config_file(a.config_path, &cfg);
  if (a.seed_set) cfg.seed = a.seed;
  if (a.restarts_set) cfg.restarts = a.restarts;

  if (a.subsample > 0) {
    const int n = static_cast<int>(data.X.rows());
    if (a.subsample < n) {
      const std::vector<int> keep = qgp::maximin_subsample(
          data, a.subsample, a.subsample_candidates, cfg.seed);
      data = qgp::subset_rows(data, keep);
      std::printf("subsample: kept %d of %d rows (maximin over %d candidates)\n",
                  a.subsample, n, a.subsample_candidates);
    } else {
      std::printf("subsample: requested %d >= %d rows, keeping all\n",
                  a.subsample, n);
    }
  }

  const qgp::QuantileModel model = qgp::fit(data, a.tau, cfg);
  qgp::save_model(model, a.out_model);

  std::printf("fit: n=%d d=%d tau=%s target=%s\n",
              static_cast<int>(data.X.rows()), model.input_dim(),
              fmt9(a.tau).c_str(), a.target.c_str());
  std::printf("log_expected_utility: %s\n",
              fmt9(model.ep_state.log_z_ep).c_str());
  for (int j = 0; j < model.input_dim(); ++j) {
    const std::string name = j < static_cast<int>(model.column_names.size())
                                 ? model.column_names[static_cast<size_t>(j)]
                                 : "x" + std::to_string(j + 1);
    std::printf("lengthscale %s: %s\n", name.c_str(),
                fmt9(model.kernel_params.lengthscales[j]).c_str());
  }
  std::printf("amplitude: %s\n", fmt9(model.kernel_params.amplitude).c_str());
  std::printf("sigma: %s\n", fmt9(model.ald_sigma).c_str());
  std::printf("ep_sweeps: %d\n", model.ep_state.sweeps);
  std::printf("ep_converged: %s\n", model.ep_state.converged ? "yes" : "no");
  std::printf("restarts: %d chosen: %d\n",
              static_cast<int>(model.fit_report.restarts.size()),
              model.fit_report.chosen);
  std::printf("model: %s\n", a.out_model.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// predict

// lo:hi:n with lo <= hi and n >= 1; validated again by the CLI flag check.
void parse_grid(const std::string& s, double* lo, double* hi, int* n) {
  const size_t c1 = s.find(':');
  const size_t c2 = c1 == std::string::npos ? c1 : s.find(':', c1 + 1);
  qgp::require(c1 != std::string::npos && c2 != std::string::npos,
               qgp::ErrorCode::parse_error,
               "grid: expected lo:hi:n, got \"" + s + "\"");
  const std::string a = s.substr(0, c1);
  const std::string b = s.substr(c1 + 1, c2 - c1 - 1);
  const std::string c = s.substr(c2 + 1);
  char* end = nullptr;
  *lo = std::strtod(a.c_str(), &end);
  qgp::require(!a.empty() && end == a.c_str() + a.size(),
               qgp::ErrorCode::parse_error, "grid: bad number \"" + a + "\"");
  *hi = std::strtod(b.c_str(), &end);
  qgp::require(!b.empty() && end == b.c_str() + b.size(),
               qgp::ErrorCode::parse_error, "grid: bad number \"" + b + "\"");
  const long nl = std::strtol(c.c_str(), &end, 10);
  qgp::require(!c.empty() && end == c.c_str() + c.size(),
               qgp::ErrorCode::parse_error, "grid: bad count \"" + c + "\"");
  qgp::require(*lo <= *hi, qgp::ErrorCode::parse_error,
               "grid: lo must not exceed hi");
  qgp::require(nl >= 1 && nl <= 10000000, qgp::ErrorCode::parse_error,
               "grid: n must be in [1, 1e7]");
  *n = static_cast<int>(nl);
}

std::string check_grid_flag(const std::string& s) {
  try {
    double lo, hi;
    int n;
    parse_grid(s, &lo, &hi, &n);
  } catch (const qgp::Error& e) {
    return e.what();
  }
  return {};
}

// Pick the model's input columns out of a loaded CSV.  Named selection when
// the model knows its column names and the file has them all (extra columns
// such as the target are ignored); otherwise the column count must match the
// model's input dimension exactly.
Eigen::MatrixXd select_inputs(const Eigen::MatrixXd& M,
                              const std::vector<std::string>& header,
                              const qgp::QuantileModel& model,
                              std::vector<std::string>* used_names) {
  const int d = model.input_dim();
  if (!model.column_names.empty()) {
    std::vector<int> pos;
    pos.reserve(model.column_names.size());
    for (const std::string& name : model.column_names) {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) break;
      pos.push_back(static_cast<int>(it - header.begin()));
    }
    if (static_cast<int>(pos.size()) == d) {
      Eigen::MatrixXd X(M.rows(), d);
      for (int j = 0; j < d; ++j) X.col(j) = M.col(pos[static_cast<size_t>(j)]);
      *used_names = model.column_names;
      return X;
    }
  }
  if (static_cast<int>(M.cols()) == d) {
    *used_names = header;
    return M;
  }
  std::string expect = std::to_string(d) + " input column(s)";
  if (!model.column_names.empty())
    expect += " (" + join(model.column_names, ", ") + ")";
  qgp::fail(qgp::ErrorCode::dimension_mismatch,
            "predict: model expects " + expect + ", data has " +
                std::to_string(M.cols()) + " column(s) (" + join(header, ", ") +
                ")");
}

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& grid, const std::string& out) {
  const qgp::QuantileModel model = qgp::load_model(model_path);

  Eigen::MatrixXd X;
  std::vector<std::string> names;
  if (!grid.empty()) {
    qgp::require(model.input_dim() == 1, qgp::ErrorCode::dimension_mismatch,
                 "predict: --grid is one-dimensional but the model expects " +
                     std::to_string(model.input_dim()) + " inputs");
    double lo, hi;
    int n;
    parse_grid(grid, &lo, &hi, &n);
    X.resize(n, 1);
    for (int i = 0; i < n; ++i)
      X(i, 0) = n == 1 ? lo : lo + (hi - lo) * i / (n - 1.0);
    names = model.column_names.empty() ? std::vector<std::string>{"x1"}
                                       : model.column_names;
  } else {
    std::vector<std::string> header;
    const Eigen::MatrixXd M = qgp::load_csv_matrix(data_path, &header);
    X = select_inputs(M, header, model, &names);
  }

  const auto [mean, var] = qgp::predict(model, X);

  std::ofstream os(out, std::ios::binary);
  qgp::require(os.good(), qgp::ErrorCode::io_error,
               "predict: cannot open " + out + " for writing");
  os << join(names, ",") << ",q_mean,q_var\n";
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) os << fmt9(X(i, j)) << ",";
    os << fmt9(mean[i]) << "," << fmt9(var[i]) << "\n";
  }
  os.flush();
  qgp::require(os.good(), qgp::ErrorCode::io_error,
               "predict: failed writing " + out);

  std::printf("predict: n=%d d=%d tau=%s out=%s\n",
              static_cast<int>(X.rows()), static_cast<int>(X.cols()),
              fmt9(model.tau).c_str(), out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// cv

struct CvArgs {
  std::string data_path;
  std::string target = "y";
  double tau = 0.5;
  int k = 10;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string baselines_csv;
  int restarts = 0;
  bool restarts_set = false;
  std::string config_path;
};

std::pair<double, double> mean_sd(const std::vector<double>& v) {
  const int n = static_cast<int>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  if (n < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1))};
}

void emit_method_json(std::string* out, const std::string& name,
                      const std::vector<double>& per_fold, bool last) {
  const auto [mean, sd] = mean_sd(per_fold);
  *out += "    \"" + name + "\": {\n      \"per_fold\": [";
  for (size_t i = 0; i < per_fold.size(); ++i) {
    if (i) *out += ", ";
    *out += fmt9(per_fold[i]);
  }
  *out += "],\n      \"mean\": " + fmt9(mean) + ",\n      \"sd\": " + fmt9(sd) +
          "\n    }";
  *out += last ? "\n" : ",\n";
}

int cmd_cv(const CvArgs& a) {
  const qgp::Dataset data = qgp::load_csv(a.data_path, a.target);
  const int n = static_cast<int>(data.X.rows());
  qgp::require(a.k >= 2 && a.k <= n, qgp::ErrorCode::invalid_argument,
               "cv: k must be between 2 and the number of rows (" +
                   std::to_string(n) + "), got " + std::to_string(a.k));

  bool want_unconditional = false, want_linear = false;
  if (!a.baselines_csv.empty()) {
    std::string rest = a.baselines_csv;
    while (!rest.empty()) {
      const size_t comma = rest.find(',');
      const std::string item = rest.substr(0, comma);
      rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
      if (item == "unconditional") want_unconditional = true;
      else if (item == "linear-gaussian") want_linear = true;
      else
        qgp::fail(qgp::ErrorCode::invalid_argument,
                  "cv: unknown baseline \"" + item +
                      "\" (available: unconditional, linear-gaussian)");
    }
  }

  qgp::OptConfig cfg;
  if (!a.config_path.empty()) apply_config_file(a.config_path, &cfg);
  if (a.seed_set) cfg.seed = a.seed;
  if (a.restarts_set) cfg.restarts = a.restarts;
  const std::uint64_t seed = a.seed_set ? a.seed : cfg.seed;

  const std::vector<std::vector<int>> folds = qgp::kfold_split(n, a.k, seed);

  std::vector<double> qgp_loss(static_cast<size_t>(a.k));
  std::vector<double> unc_loss(static_cast<size_t>(a.k));
  std::vector<double> lin_loss(static_cast<size_t>(a.k));

  qgp::parallel_for(a.k, qgp::thread_budget(), [&](int f) {
    const std::vector<int>& test = folds[static_cast<size_t>(f)];
    std::vector<bool> is_test(static_cast<size_t>(n), false);
    for (int i : test) is_test[static_cast<size_t>(i)] = true;
    std::vector<int> train;
    train.reserve(static_cast<size_t>(n - static_cast<int>(test.size())));
    for (int i = 0; i < n; ++i)
      if (!is_test[static_cast<size_t>(i)]) train.push_back(i);

    const qgp::Dataset tr = qgp::subset_rows(data, train);
    const qgp::Dataset te = qgp::subset_rows(data, test);

    qgp::OptConfig fold_cfg = cfg;
    fold_cfg.seed = qgp::Rng::substream(seed, static_cast<std::uint64_t>(f))
                        .next_u64();
    const qgp::QuantileModel model = qgp::fit(tr, a.tau, fold_cfg);
    const auto [mean, var] = qgp::predict(model, te.X);
    qgp_loss[static_cast<size_t>(f)] = qgp::pinball_mean(te.y, mean, a.tau);

    if (want_unconditional) {
      const double q = qgp::baseline_unconditional(tr.y, a.tau);
      const Eigen::VectorXd qv = Eigen::VectorXd::Constant(te.y.size(), q);
      unc_loss[static_cast<size_t>(f)] = qgp::pinball_mean(te.y, qv, a.tau);
    }
    if (want_linear) {
      const qgp::LinearGaussianBaseline b =
          qgp::baseline_linear_gaussian(tr, a.tau);
      lin_loss[static_cast<size_t>(f)] =
          qgp::pinball_mean(te.y, b.predict(te.X), a.tau);
    }
  });

  std::string out;
  out += "{\n";
  out += "  \"command\": \"cv\",\n";
  out += "  \"tau\": " + fmt9(a.tau) + ",\n";
  out += "  \"k\": " + std::to_string(a.k) + ",\n";
  out += "  \"seed\": " + std::to_string(seed) + ",\n";
  out += "  \"n_rows\": " + std::to_string(n) + ",\n";
  out += "  \"loss\": \"pinball\",\n";
  out += "  \"methods\": {\n";
  emit_method_json(&out, "qgp", qgp_loss, !want_unconditional && !want_linear);
  if (want_unconditional)
    emit_method_json(&out, "unconditional", unc_loss, !want_linear);
  if (want_linear) emit_method_json(&out, "linear-gaussian", lin_loss, true);
  out += "  }\n";
  out += "}\n";
  std::fputs(out.c_str(), stdout);
  return 0;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const std::vector<std::string>& model_paths,
             const std::string& data_path, const std::string& target) {
  const qgp::Dataset data = qgp::load_csv(data_path, target);

  struct Entry {
    std::string path;
    qgp::QuantileModel model;
  };
  std::vector<Entry> entries;
  entries.reserve(model_paths.size());
  for (const std::string& p : model_paths)
    entries.push_back({p, qgp::load_model(p)});
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) {
                     return a.model.tau < b.model.tau;
                   });

  std::printf("coverage:\n");
  for (const Entry& e : entries) {
    const auto [mean, var] = qgp::predict(e.model, data.X);
    const double cov = qgp::coverage_indicator(data.y, mean);
    const double loss = qgp::pinball_mean(data.y, mean, e.model.tau);
    std::printf("  model=%s tau=%s coverage=%s pinball=%s n=%d\n",
                e.path.c_str(), fmt9(e.model.tau).c_str(), fmt9(cov).c_str(),
                fmt9(loss).c_str(), static_cast<int>(data.y.size()));
  }

  std::printf("ard:\n");
  for (const Entry& e : entries) {
    const std::vector<qgp::ArdEntry> ranking = qgp::ard_ranking(e.model);
    std::string line = "  model=" + e.path + " tau=" + fmt9(e.model.tau);
    for (const qgp::ArdEntry& r : ranking)
      line += " " + r.name + "=" + fmt9(r.lengthscale);
    std::printf("%s\n", line.c_str());
  }

  if (entries.size() >= 2) {
    std::vector<qgp::QuantileModel> models;
    models.reserve(entries.size());
    for (const Entry& e : entries) models.push_back(e.model);
    const qgp::CrossingReport report = qgp::detect_crossings(models, data.X);
    std::printf("crossings:\n");
    std::printf("  pairs=%d grid_points=%d violations=%d ties=%d\n",
                static_cast<int>(entries.size()) - 1,
                static_cast<int>(data.X.rows()),
                static_cast<int>(report.violations.size()),
                static_cast<int>(report.ties.size()));
    const size_t shown = std::min<size_t>(report.violations.size(), 10);
    for (size_t i = 0; i < shown; ++i) {
      const qgp::Crossing& c = report.violations[i];
      std::printf("  violation: index=%d tau_low=%s tau_high=%s margin=%s\n",
                  c.grid_index, fmt9(c.tau_low).c_str(),
                  fmt9(c.tau_high).c_str(), fmt9(c.margin).c_str());
    }
    if (report.violations.size() > shown)
      std::printf("  ... %d more violation(s)\n",
                  static_cast<int>(report.violations.size() - shown));
  }
  return 0;
}

std::string check_open_unit(const std::string& s) {
  char* end = nullptr;
  const double t = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !(t > 0.0 && t < 1.0))
    return "must be a number strictly between 0 and 1";
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantile Gaussian-process regression"};
  app.require_subcommand(1);
  app.failure_message([](const CLI::App*, const CLI::Error& e) {
    return std::string("error: usage: ") + e.what() + "\n";
  });

  // synth
  auto* synth = app.add_subcommand(
      "synth", "generate the heteroscedastic chi-squared benchmark CSV");
  int synth_n = 0;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--n", synth_n, "number of rows")
      ->required()
      ->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--out", synth_out, "output CSV path")->required();

  // fit
  auto* fit = app.add_subcommand("fit", "train a quantile model on a CSV");
  FitArgs fa;
  fit->add_option("--data", fa.data_path, "training CSV")->required();
  fit->add_option("--target", fa.target, "target column name (default y)");
  fit->add_option("--tau", fa.tau, "quantile level in (0,1)")
      ->required()
      ->check(check_open_unit, "", "open-unit");
  auto* fit_restarts =
      fit->add_option("--restarts", fa.restarts, "optimizer restarts")
          ->check(CLI::PositiveNumber);
  auto* fit_seed = fit->add_option("--seed", fa.seed, "fit seed");
  fit->add_option("--out-model", fa.out_model, "model file to write")
      ->required();
  fit->add_option("--config", fa.config_path,
                  "JSON config with ep/opt settings (flags override)");
  fit->add_option("--subsample", fa.subsample,
                  "maximin-subsample the training rows to this count")
      ->check(CLI::PositiveNumber);
  fit->add_option("--subsample-candidates", fa.subsample_candidates,
                  "random subsets scored by the maximin rule (default 1000)")
      ->check(CLI::PositiveNumber);

  // predict
  auto* predict = app.add_subcommand(
      "predict", "predict quantile mean/variance at new inputs");
  std::string pr_model, pr_data, pr_grid, pr_out;
  predict->add_option("--model", pr_model, "model file")->required();
  auto* pr_data_opt = predict->add_option("--data", pr_data, "input CSV");
  auto* pr_grid_opt =
      predict
          ->add_option("--grid", pr_grid,
                       "1-D grid lo:hi:n (e.g. 0:2:200), endpoints included")
          ->check(check_grid_flag, "", "grid");
  pr_data_opt->excludes(pr_grid_opt);
  pr_grid_opt->excludes(pr_data_opt);
  predict->add_option("--out", pr_out, "output CSV path")->required();

  // cv
  auto* cv = app.add_subcommand(
      "cv", "k-fold cross-validated pinball loss, optional baselines");
  CvArgs ca;
  cv->add_option("--data", ca.data_path, "CSV with inputs and target")
      ->required();
  cv->add_option("--target", ca.target, "target column name (default y)");
  cv->add_option("--tau", ca.tau, "quantile level in (0,1)")
      ->required()
      ->check(check_open_unit, "", "open-unit");
  cv->add_option("--k", ca.k, "number of folds (default 10)")
      ->check(CLI::PositiveNumber);
  auto* cv_seed = cv->add_option("--seed", ca.seed, "partition and fit seed");
  cv->add_option("--baselines", ca.baselines_csv,
                 "comma-separated: unconditional,linear-gaussian");
  auto* cv_restarts =
      cv->add_option("--restarts", ca.restarts, "optimizer restarts per fold")
          ->check(CLI::PositiveNumber);
  cv->add_option("--config", ca.config_path,
                 "JSON config with ep/opt settings (flags override)");

  // eval
  auto* eval = app.add_subcommand(
      "eval", "coverage, lengthscale ranking, and crossings on held-out data");
  std::vector<std::string> ev_models;
  std::string ev_data;
  std::string ev_target = "y";
  eval->add_option("--model", ev_models, "model file (repeatable)")
      ->required();
  eval->add_option("--data", ev_data, "evaluation CSV")->required();
  eval->add_option("--target", ev_target, "target column name (default y)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_n, synth_seed, synth_out);
    if (fit->parsed()) {
      fa.restarts_set = fit_restarts->count() > 0;
      fa.seed_set = fit_seed->count() > 0;
      return cmd_fit(fa);
    }
    if (predict->parsed()) {
      qgp::require(pr_data_opt->count() > 0 || pr_grid_opt->count() > 0,
                   qgp::ErrorCode::invalid_argument,
                   "predict: provide either --data or --grid");
      return cmd_predict(pr_model, pr_data, pr_grid, pr_out);
    }
    if (cv->parsed()) {
      ca.restarts_set = cv_restarts->count() > 0;
      ca.seed_set = cv_seed->count() > 0;
      return cmd_cv(ca);
    }
    if (eval->parsed()) return cmd_eval(ev_models, ev_data, ev_target);
  } catch (const qgp::Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.code_name(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
  return 0;
}
