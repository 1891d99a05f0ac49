// Command-line front end: fit / predict / residuals / simulate.
//
// Exit codes: 0 success, 1 input error, 2 estimation impossible
// (rank deficiency, degenerate data, numeric failure), 3 non-convergence.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "haft/haft.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitEstimation = 2;
constexpr int kExitNoConverge = 3;

struct FitOptions {
  std::string data_path;
  std::string time_col = "time";
  std::string status_col = "status";
  std::string loc_terms;
  std::string scale_terms = "1";
  std::string out_path;
  double tol = 1e-8;
  int max_iter = 500;
  double level = 0.95;
};

struct PredictOptions {
  std::string model_path;
  std::string data_path;
  std::string out_path;
  std::string grid;
  std::string curve_out;
  double level = 0.95;
};

struct ResidualOptions {
  std::string model_path;
  std::string cens_model_path;
  bool fit_censoring = false;
  std::string cens_loc_terms;
  std::string cens_scale_terms;
  std::string data_path;
  std::string time_col = "time";
  std::string status_col = "status";
  std::string out_path;
  std::string method = "pit";
  std::optional<std::uint64_t> seed;
  double tol = 1e-8;
  int max_iter = 500;
};

struct SimulateOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_path;
  std::string truth_out;
};

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw haft::InputError("cannot open '" + path + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Covariates-only view of a CSV (prediction input needs no outcome columns):
// every column becomes a covariate, with a placeholder response.
haft::SurvivalDataset covariates_from_csv(const haft::CsvTable& table) {
  haft::SurvivalDataset data;
  const Eigen::Index n = table.n_rows();
  if (n < 1) throw haft::InputError("csv: no data rows");
  data.time = Eigen::VectorXd::Ones(n);
  data.status.assign(static_cast<std::size_t>(n), haft::Status::event);
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    bool numeric = true;
    for (const auto& row : table.rows) {
      if (row[j].empty())
        throw haft::InputError("csv: column '" + table.header[j] + "' has an empty cell");
      double value;
      if (!haft::detail::parse_double(row[j], value)) {
        numeric = false;
        break;
      }
    }
    if (numeric) {
      Eigen::VectorXd v(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        double value;
        haft::detail::parse_double(table.rows[static_cast<std::size_t>(i)][j], value);
        v(i) = value;
      }
      data.covariates.emplace_back(table.header[j], haft::DataColumn::numeric(std::move(v)));
    } else {
      std::vector<std::string> v;
      for (const auto& row : table.rows) v.push_back(row[j]);
      data.covariates.emplace_back(table.header[j], haft::DataColumn::categorical(std::move(v)));
    }
  }
  return data;
}

void print_summary(const haft::FittedModel& model, double level) {
  std::printf("%-28s %-9s %13s %13s %9s %13s %13s\n", "term", "part", "estimate", "std.error",
              "z", "ci.lower", "ci.upper");
  if (model.vcov) {
    const haft::WaldSummary summary = haft::wald_summary(model, level);
    for (const haft::WaldRow& row : summary.rows)
      std::printf("%-28s %-9s %13.6g %13.6g %9.3f %13.6g %13.6g\n", row.name.c_str(),
                  row.part == haft::ParamPart::location ? "location" : "scale", row.estimate,
                  row.std_error, row.z_value, row.ci_lower, row.ci_upper);
  } else {
    for (Eigen::Index j = 0; j < model.params.beta.size(); ++j)
      std::printf("%-28s %-9s %13.6g\n", model.w_names[static_cast<std::size_t>(j)].c_str(),
                  "location", model.params.beta(j));
    for (Eigen::Index j = 0; j < model.params.gamma.size(); ++j)
      std::printf("%-28s %-9s %13.6g\n", model.z_names[static_cast<std::size_t>(j)].c_str(),
                  "scale", model.params.gamma(j));
  }
  std::printf("\nn %lld   loglik %.10g   AIC %.10g   iterations %d   converged %s   fit %s\n",
              static_cast<long long>(model.n), model.loglik, model.aic, model.iterations,
              model.converged ? "yes" : "no", model.censored_fit ? "censored" : "uncensored");
  if (model.vcov_clipped)
    std::fprintf(stderr,
                 "warning: information matrix not positive definite; "
                 "covariance from clipped eigenvalues\n");
}

int run_fit(const FitOptions& opt) {
  const haft::CsvTable table = haft::read_csv_file(opt.data_path);
  const haft::SurvivalDataset data =
      haft::dataset_from_csv(table, opt.time_col, opt.status_col);
  haft::CovariateSpec spec;
  spec.location = haft::parse_terms(opt.loc_terms);
  spec.scale = haft::parse_terms(opt.scale_terms);
  const haft::DesignPair designs = haft::build_designs(data, spec);
  haft::FitControl control;
  control.tol = opt.tol;
  control.max_iter = opt.max_iter;
  const Eigen::VectorXd logtimes = data.logtimes();
  haft::FittedModel model = haft::fit_censored(designs, logtimes, data.status, control);
  if (model.converged) haft::attach_covariance(model, designs, logtimes, data.status);

  haft::ModelFile file;
  file.spec = spec;
  file.encoding = designs.encoding;
  file.model = model;
  file.data_fingerprint = haft::fingerprint(data);
  haft::save_model_file(opt.out_path, file);

  print_summary(model, opt.level);
  if (!model.converged) {
    std::fprintf(stderr, "warning: no convergence within %d iterations (model written to %s)\n",
                 opt.max_iter, opt.out_path.c_str());
    return kExitNoConverge;
  }
  return kExitOk;
}

std::vector<double> parse_grid(const std::string& text) {
  double lo = 0.0, hi = 0.0;
  int count = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3)
    throw haft::InputError("--grid must look like min:max:count");
  if (!(lo > 0.0) || !(hi > lo) || count < 2)
    throw haft::InputError("--grid needs 0 < min < max and count >= 2");
  std::vector<double> grid(static_cast<std::size_t>(count));
  const double step = (std::log(hi) - std::log(lo)) / (count - 1);
  for (int k = 0; k < count; ++k) grid[static_cast<std::size_t>(k)] = std::exp(std::log(lo) + k * step);
  return grid;
}

int run_predict(const PredictOptions& opt) {
  const haft::ModelFile file = haft::load_model_file(opt.model_path);
  const haft::SurvivalDataset data = covariates_from_csv(haft::read_csv_file(opt.data_path));
  const haft::DesignPair designs = haft::build_designs(data, file.spec, file.encoding);
  const haft::LinearPredictors lp = haft::linear_predictors(designs, file.model.params);

  haft::CsvTable out;
  out.header = {"row", "mu", "sigma", "median", "lower", "upper", "width"};
  for (Eigen::Index i = 0; i < designs.n(); ++i) {
    const haft::PredictionInterval interval =
        haft::prediction_interval(lp.mu(i), lp.sigma(i), opt.level);
    out.rows.push_back({std::to_string(i + 1), haft::format_g17(lp.mu(i)),
                        haft::format_g17(lp.sigma(i)),
                        haft::format_g17(haft::survival_quantile(0.5, lp.mu(i), lp.sigma(i))),
                        haft::format_g17(interval.lower), haft::format_g17(interval.upper),
                        haft::format_g17(interval.width)});
  }
  haft::write_csv_file(opt.out_path, out);

  if (!opt.curve_out.empty()) {
    if (opt.grid.empty()) throw haft::InputError("--curve-out requires --grid");
    const std::vector<double> grid = parse_grid(opt.grid);
    haft::CsvTable curves;
    curves.header = {"row", "time", "survival"};
    for (Eigen::Index i = 0; i < designs.n(); ++i) {
      const haft::EncodedRow row{designs.W.row(i).transpose(), designs.Z.row(i).transpose()};
      const haft::SurvivalCurve curve = haft::survival_curve(row, file.model, grid);
      for (std::size_t k = 0; k < curve.times.size(); ++k)
        curves.rows.push_back({std::to_string(i + 1), haft::format_g17(curve.times[k]),
                               haft::format_g17(curve.survival[k])});
    }
    haft::write_csv_file(opt.curve_out, curves);
  }
  std::printf("predictions for %lld rows written to %s\n",
              static_cast<long long>(designs.n()), opt.out_path.c_str());
  return kExitOk;
}

// Default censoring-model terms: the survival model's location terms for the
// location part, its main-effect terms only for the scale part.
haft::CovariateSpec default_censoring_spec(const haft::CovariateSpec& surv) {
  haft::CovariateSpec spec;
  spec.location = surv.location;
  spec.scale.intercept = true;
  for (const haft::Term& t : surv.location.terms)
    if (t.kind == haft::Term::Kind::main) spec.scale.terms.push_back(t);
  return spec;
}

int run_residuals(const ResidualOptions& opt) {
  if (opt.method != "pit" && opt.method != "hillis")
    throw haft::InputError("--method must be pit or hillis");
  const haft::ModelFile surv_file = haft::load_model_file(opt.model_path);
  const haft::CsvTable table = haft::read_csv_file(opt.data_path);
  const haft::SurvivalDataset data =
      haft::dataset_from_csv(table, opt.time_col, opt.status_col);
  const haft::DesignPair surv_designs =
      haft::build_designs(data, surv_file.spec, surv_file.encoding);
  const Eigen::VectorXd logtimes = data.logtimes();

  Eigen::VectorXd residuals;
  double ks_stat = 0.0, ks_p = 0.0;
  if (opt.method == "pit") {
    haft::CovariateSpec cens_spec;
    haft::EncodingMap cens_encoding;
    haft::CensoringModel cens;
    if (!opt.cens_model_path.empty()) {
      const haft::ModelFile cens_file = haft::load_model_file(opt.cens_model_path);
      if (cens_file.data_fingerprint.rows != surv_file.data_fingerprint.rows ||
          cens_file.data_fingerprint.column_hash != surv_file.data_fingerprint.column_hash)
        throw haft::InputError(
            "survival and censoring models were fitted on different datasets "
            "(fingerprints disagree)");
      cens_spec = cens_file.spec;
      cens_encoding = cens_file.encoding;
      cens.model = cens_file.model;
    } else if (opt.fit_censoring) {
      cens_spec = default_censoring_spec(surv_file.spec);
      if (!opt.cens_loc_terms.empty()) cens_spec.location = haft::parse_terms(opt.cens_loc_terms);
      if (!opt.cens_scale_terms.empty()) cens_spec.scale = haft::parse_terms(opt.cens_scale_terms);
      cens_encoding = surv_file.encoding;
      haft::FitControl control;
      control.tol = opt.tol;
      control.max_iter = opt.max_iter;
      const haft::DesignPair cens_designs_fit =
          haft::build_designs(data, cens_spec, cens_encoding);
      cens = haft::fit_censoring_model(cens_designs_fit, logtimes, data.status, control);
      if (!cens.model.converged)
        throw haft::EstimationError("inline censoring-model fit did not converge");
    } else {
      throw haft::InputError("pit residuals need --cens-model FILE or --fit-censoring");
    }
    const haft::DesignPair cens_designs = haft::build_designs(data, cens_spec, cens_encoding);
    const haft::ResidualReport report = haft::pit_residuals(
        logtimes, data.status, surv_designs, surv_file.model, cens_designs, cens);
    residuals = report.residuals;
    ks_stat = report.ks_statistic;
    ks_p = report.ks_pvalue;
  } else {
    if (!opt.seed) throw haft::InputError("--method hillis requires --seed");
    const haft::LinearPredictors lp =
        haft::linear_predictors(surv_designs, surv_file.model.params);
    residuals = haft::hillis_residuals(logtimes, data.status, lp.mu, lp.sigma, *opt.seed);
    const auto [d, p] = haft::ks_normal(residuals);
    ks_stat = d;
    ks_p = p;
  }

  const double bound = haft::norm_quantile(1.0 - 0.025);
  haft::CsvTable out;
  out.header = {"row", "status", "residual", "outlier"};
  Eigen::Index outliers_event = 0, outliers_censored = 0;
  for (Eigen::Index i = 0; i < residuals.size(); ++i) {
    const bool event = data.status[static_cast<std::size_t>(i)] == haft::Status::event;
    const bool outlier = std::abs(residuals(i)) > bound;
    if (outlier) (event ? outliers_event : outliers_censored) += 1;
    out.rows.push_back({std::to_string(i + 1), event ? "1" : "0",
                        haft::format_g17(residuals(i)), outlier ? "1" : "0"});
  }
  haft::write_csv_file(opt.out_path, out);

  std::printf("method %s   n %lld   ks_statistic %.17g   ks_pvalue %.17g\n", opt.method.c_str(),
              static_cast<long long>(residuals.size()), ks_stat, ks_p);
  std::printf("outliers (|residual| > %.6f): %lld among events, %lld among censored\n", bound,
              static_cast<long long>(outliers_event), static_cast<long long>(outliers_censored));
  return kExitOk;
}

int run_simulate(const SimulateOptions& opt) {
  const haft::SimSpec spec = haft::sim_spec_from_json(read_text_file(opt.config_path), opt.seed);
  const haft::SimResult result = haft::simulate(spec);
  haft::write_csv_file(opt.out_path, haft::dataset_to_csv(result.data));
  if (!opt.truth_out.empty()) {
    haft::CsvTable truth;
    truth.header = {"row", "log_r", "log_c", "mu", "sigma"};
    for (Eigen::Index i = 0; i < result.data.n(); ++i)
      truth.rows.push_back({std::to_string(i + 1), haft::format_g17(result.truth.log_r(i)),
                            haft::format_g17(result.truth.log_c(i)),
                            haft::format_g17(result.truth.mu(i)),
                            haft::format_g17(result.truth.sigma(i))});
    haft::write_csv_file(opt.truth_out, truth);
  }
  std::printf("n %lld   censoring_rate %.17g\n", static_cast<long long>(result.data.n()),
              haft::censoring_rate(result.data));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heteroscedastic accelerated-failure-time survival modeling"};
  app.require_subcommand(1);

  FitOptions fit_opt;
  CLI::App* fit = app.add_subcommand("fit", "Fit a model to right-censored data");
  fit->add_option("--data", fit_opt.data_path, "input CSV")->required();
  fit->add_option("--time", fit_opt.time_col, "time column name (default: time)");
  fit->add_option("--status", fit_opt.status_col,
                  "status column name, 1=event 0=censored (default: status)");
  fit->add_option("--loc-terms", fit_opt.loc_terms,
                  "location terms, comma separated (name, name:name, name^2, 1)");
  fit->add_option("--scale-terms", fit_opt.scale_terms,
                  "scale terms, comma separated (default: 1 = intercept only)");
  fit->add_option("--out", fit_opt.out_path, "output model JSON path")->required();
  fit->add_option("--tol", fit_opt.tol, "relative log-likelihood tolerance (default 1e-8)");
  fit->add_option("--max-iter", fit_opt.max_iter, "maximum outer iterations (default 500)");
  fit->add_option("--level", fit_opt.level, "confidence level for the summary (default 0.95)");

  PredictOptions pred_opt;
  CLI::App* predict = app.add_subcommand("predict", "Predict survival for new covariate rows");
  predict->add_option("--model", pred_opt.model_path, "model JSON from fit")->required();
  predict->add_option("--data", pred_opt.data_path, "CSV of covariate rows")->required();
  predict->add_option("--out", pred_opt.out_path, "output CSV path")->required();
  predict->add_option("--level", pred_opt.level, "prediction-interval level (default 0.95)");
  predict->add_option("--grid", pred_opt.grid, "survival-curve time grid, min:max:count (log-spaced)");
  predict->add_option("--curve-out", pred_opt.curve_out, "long-format survival curve CSV path");

  ResidualOptions res_opt;
  CLI::App* residuals = app.add_subcommand("residuals", "Censoring-aware residual diagnostics");
  residuals->add_option("--model", res_opt.model_path, "survival model JSON")->required();
  residuals->add_option("--data", res_opt.data_path, "input CSV")->required();
  residuals->add_option("--time", res_opt.time_col, "time column name (default: time)");
  residuals->add_option("--status", res_opt.status_col, "status column name (default: status)");
  residuals->add_option("--cens-model", res_opt.cens_model_path, "censoring model JSON");
  residuals->add_flag("--fit-censoring", res_opt.fit_censoring,
                      "fit the censoring model inline (flipped status)");
  residuals->add_option("--cens-loc-terms", res_opt.cens_loc_terms,
                        "censoring-model location terms (with --fit-censoring)");
  residuals->add_option("--cens-scale-terms", res_opt.cens_scale_terms,
                        "censoring-model scale terms (with --fit-censoring)");
  residuals->add_option("--method", res_opt.method, "pit (default) or hillis");
  std::uint64_t res_seed = 0;
  CLI::Option* res_seed_opt =
      residuals->add_option("--seed", res_seed, "seed for hillis imputation");
  residuals->add_option("--out", res_opt.out_path, "output CSV path")->required();
  residuals->add_option("--tol", res_opt.tol, "tolerance for inline censoring fit");
  residuals->add_option("--max-iter", res_opt.max_iter, "iteration cap for inline censoring fit");

  SimulateOptions sim_opt;
  CLI::App* simulate = app.add_subcommand("simulate", "Draw synthetic datasets from the model");
  simulate->add_option("--config", sim_opt.config_path, "simulation spec JSON")->required();
  std::uint64_t sim_seed = 0;
  CLI::Option* sim_seed_opt = simulate->add_option("--seed", sim_seed, "master seed");
  simulate->add_option("--out", sim_opt.out_path, "output dataset CSV")->required();
  simulate->add_option("--truth-out", sim_opt.truth_out, "latent-truth sidecar CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  if (res_seed_opt->count() > 0) res_opt.seed = res_seed;
  if (sim_seed_opt->count() > 0) sim_opt.seed = sim_seed;

  try {
    if (fit->parsed()) return run_fit(fit_opt);
    if (predict->parsed()) return run_predict(pred_opt);
    if (residuals->parsed()) return run_residuals(res_opt);
    if (simulate->parsed()) return run_simulate(sim_opt);
    std::fprintf(stderr, "error: no subcommand\n");
    return kExitInput;
  } catch (const haft::InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const haft::DomainError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const haft::SingularError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitEstimation;
  } catch (const haft::QuadratureError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitEstimation;
  } catch (const haft::EstimationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitEstimation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitEstimation;
  }
}
