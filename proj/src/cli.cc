/*
 * Copyright 2026 The SPQR Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "spqr/cli.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "spqr/errors.h"
#include "spqr/interpret.h"
#include "spqr/io.h"
#include "spqr/model_file.h"
#include "spqr/sampler.h"
#include "spqr/simulate.h"
#include "spqr/trainer.h"

namespace spqr {
namespace {

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string general(double v) {
  std::ostringstream s;
  s << std::setprecision(7) << v;
  return s.str();
}

// Long-format CSV assembled row by row.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {
    body_.precision(17);
    for (size_t i = 0; i < header_.size(); ++i) body_ << (i ? "," : "") << header_[i];
    body_ << '\n';
  }
  template <typename... Ts>
  void row(const Ts&... cells) {
    size_t i = 0;
    ((body_ << (i++ ? "," : "") << cells), ...);
    body_ << '\n';
  }
  // Writes to `path` atomically, or to `out` when path is empty.
  void emit(const std::string& path, std::ostream& out) const {
    if (path.empty()) {
      out << body_.str();
    } else {
      write_file_atomic(path, body_.str());
    }
  }

 private:
  std::vector<std::string> header_;
  std::ostringstream body_;
};

// Covariate matrix of a table, dropping the response column if present.
Eigen::MatrixXd covariates(const Table& t, const std::string& response) {
  const int col = response.empty() ? -1 : t.find(response);
  if (col < 0) return t.values;
  Eigen::MatrixXd x(t.values.rows(), t.values.cols() - 1);
  for (Eigen::Index c = 0, k = 0; c < t.values.cols(); ++c) {
    if (c != col) x.col(k++) = t.values.col(c);
  }
  return x;
}

void check_covariate_count(const FittedModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.shape.inputs) {
    throw ValidationError("model expects " + std::to_string(model.shape.inputs) +
                          " covariates, the data has " + std::to_string(x.cols()));
  }
}

Dataset to_unit(const FittedModel& model, const Dataset& data) {
  Dataset d;
  d.x = model.normalization.x_to_unit(data.x, nullptr);
  d.y.resize(data.y.size());
  for (Eigen::Index i = 0; i < data.y.size(); ++i) {
    d.y[i] = model.normalization.y_to_unit(data.y[i], nullptr);
  }
  return d;
}

ElpdEstimate estimate_elpd(const FittedModel& model, const Dataset& unit_data) {
  Eigen::MatrixXd ll = pointwise_loglik(model, unit_data);
  // Report on the data scale.
  ll.array() -= std::log(model.normalization.y_width());
  return {loo_is(ll).elpd, waic(ll).elpd};
}

std::vector<int> parse_indices(const std::string& text) {
  std::vector<int> out;
  for (double v : parse_number_list(text)) {
    if (v < 1 || v != std::floor(v)) {
      throw ValidationError("covariate indices are 1-based integers");
    }
    out.push_back(static_cast<int>(v) - 1);
  }
  return out;
}

std::vector<double> default_taus() {
  std::vector<double> t;
  for (int i = 1; i <= 9; ++i) t.push_back(i / 10.0);
  return t;
}

void reject(bool flag, const std::string& option, const std::string& command) {
  if (flag) {
    throw CapabilityError(option + " is not available for '" + command + "'");
  }
}

FoldAssignment read_fold_file(const std::string& path, Eigen::Index n) {
  const Table t = read_csv(path);
  const int col = t.find("fold");
  if (col < 0) throw ValidationError(path + ": missing 'fold' column");
  if (t.values.rows() != n) {
    throw ValidationError(path + ": fold file has " +
                          std::to_string(t.values.rows()) + " rows, data has " +
                          std::to_string(n));
  }
  int nfold = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double f = t.values(i, col);
    if (f < 1 || f != std::floor(f)) {
      throw ValidationError(path + ": row " + std::to_string(i + 1) +
                            " has an invalid fold label");
    }
    nfold = std::max(nfold, static_cast<int>(f));
  }
  FoldAssignment folds(nfold);
  for (Eigen::Index i = 0; i < n; ++i) {
    folds[static_cast<int>(t.values(i, col)) - 1].push_back(i);
  }
  check_folds(folds, n);
  return folds;
}

struct Prepared {
  Dataset data;  // unit scale
  Normalization normalization;
  NetworkShape shape;
  SplineBasis basis{SplineBasis::kMinBasis};
};

Prepared prepare(const RunConfig& cfg) {
  if (cfg.data_path.empty()) throw ValidationError("no data file given (--data)");
  const Dataset raw = split_response(read_csv(cfg.data_path), cfg.response);
  Prepared p;
  p.basis = SplineBasis(cfg.n_knots);
  p.shape = cfg.shape;
  p.shape.inputs = raw.num_covariates();
  p.shape.outputs = cfg.n_knots;
  p.shape.validate();
  if (cfg.normalize) {
    p.normalization = Normalization::from_data(raw.x, raw.y);
    p.data.x = p.normalization.x_to_unit(raw.x, nullptr);
    p.data.y.resize(raw.y.size());
    for (Eigen::Index i = 0; i < raw.y.size(); ++i) {
      p.data.y[i] = p.normalization.y_to_unit(raw.y[i], nullptr);
    }
  } else {
    p.data = raw;
  }
  p.data.validate();
  return p;
}

int cmd_fit(RunConfig cfg, bool show_model, bool quiet, std::ostream& out,
            std::ostream& err) {
  if (cfg.output_path.empty()) throw ValidationError("no output model path given (--out)");
  const Prepared p = prepare(cfg);
  cfg.train.seed = cfg.seed;
  cfg.mcmc.seed = cfg.seed;
  if (!quiet) {
    cfg.train.progress = &err;
    cfg.mcmc.progress = &err;
    if (cfg.mcmc.print_every == 0) cfg.mcmc.print_every = std::max(1, cfg.mcmc.iter / 10);
  }
  FittedModel model;
  switch (cfg.method) {
    case Method::kMLE:
      model = fit_mle(p.data, p.shape, p.basis, cfg.train, p.normalization);
      break;
    case Method::kMAP:
      model = fit_map(p.data, p.shape, p.basis, cfg.prior, cfg.train, p.normalization);
      break;
    case Method::kMCMC:
      model = run_chain(p.data, p.shape, p.basis, cfg.prior, cfg.mcmc, p.normalization);
      break;
  }
  save_model(model, cfg.output_path);
  std::optional<ElpdEstimate> elpd;
  if (model.is_bayesian() && model.num_samples() >= 2) {
    elpd = estimate_elpd(model, p.data);
  }
  print_summary(model, out, show_model, elpd);
  return kExitOk;
}

struct PredictArgs {
  std::string model_path, x_path, type = "QF", grid, response, out_path;
  std::optional<double> ci_level;
  bool get_all = false;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const FittedModel model = load_model(a.model_path);
  const Eigen::MatrixXd x = covariates(read_csv(a.x_path), a.response);
  check_covariate_count(model, x);
  PredictOptions opt;
  if (!a.grid.empty()) opt.grid = parse_number_list(a.grid);
  opt.ci_level = a.ci_level;
  opt.get_all = a.get_all;
  const PredictionResult r = predict_curves(model, x, parse_curve_kind(a.type), opt);
  std::vector<std::string> header{"obs_id", "abscissa", "mean"};
  if (r.lower) {
    header.push_back("lower");
    header.push_back("upper");
  }
  if (a.get_all) {
    header.push_back("sample_id");
    header.push_back("value");
  }
  CsvWriter csv(header);
  for (Eigen::Index i = 0; i < r.mean.rows(); ++i) {
    for (size_t g = 0; g < r.grid.size(); ++g) {
      const auto gg = static_cast<Eigen::Index>(g);
      std::ostringstream prefix;
      prefix.precision(17);
      prefix << i + 1 << ',' << r.grid[g] << ',' << r.mean(i, gg);
      if (r.lower) prefix << ',' << (*r.lower)(i, gg) << ',' << (*r.upper)(i, gg);
      if (!a.get_all) {
        csv.row(prefix.str());
        continue;
      }
      for (size_t s = 0; s < r.samples.size(); ++s) {
        csv.row(prefix.str(), s + 1, r.samples[s](i, gg));
      }
    }
  }
  csv.emit(a.out_path, out);
  if (r.clamped) {
    // Not an error: queries outside the training ranges are clamped.
  }
  return kExitOk;
}

int cmd_coef(const std::string& model_path, const std::string& x_path,
             const std::string& response, const std::string& out_path,
             std::ostream& out) {
  const FittedModel model = load_model(model_path);
  const Eigen::MatrixXd x =
      model.normalization.x_to_unit(covariates(read_csv(x_path), response), nullptr);
  check_covariate_count(model, x);
  CsvWriter csv({"obs_id", "k", "theta"});
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd theta = coef(model, x.row(i).transpose());
    for (Eigen::Index k = 0; k < theta.size(); ++k) csv.row(i + 1, k + 1, theta[k]);
  }
  csv.emit(out_path, out);
  return kExitOk;
}

}  // namespace

void print_summary(const FittedModel& model, std::ostream& out, bool show_model,
                   const std::optional<ElpdEstimate>& elpd) {
  out << "SPQR fitted using " << to_string(model.method) << " approach";
  if (model.prior.has_value() && model.method != Method::kMLE) {
    out << " with " << to_string(model.prior->kind) << " prior";
  }
  out << "\n\n";
  if (!model.is_bayesian()) {
    out << "Learning rate: " << general(model.log.learning_rate) << '\n'
        << "Batch size: " << model.log.batch_size << "\n\n";
  }
  if (show_model) {
    out << "Model specification:\n"
        << "    Layers\n"
        << "   Input Output Activation\n";
    for (int l = 0; l < model.shape.num_layers(); ++l) {
      const bool last = l + 1 == model.shape.num_layers();
      out << std::setw(8) << model.shape.width(l) << std::setw(7)
          << model.shape.width(l + 1) << std::setw(11)
          << (last ? "softmax" : to_string(model.shape.activation)) << '\n';
    }
    out << '\n';
  }
  if (model.is_bayesian()) {
    out << "MCMC diagnostics:\n"
        << "  Final acceptance ratio is " << fixed(model.log.mean_accept, 2)
        << " and target is " << general(model.log.target_accept) << '\n';
    if (model.log.divergences > 0) {
      out << "  " << model.log.divergences << " divergent transitions after warmup\n";
    }
    out << '\n';
    if (elpd.has_value()) {
      out << "Expected log pointwise predictive density (elpd) estimates:\n"
          << "  elpd.LOO = " << fixed(elpd->loo, 4) << ",  elpd.WAIC = "
          << fixed(elpd->waic, 4) << "\n\n";
    }
  } else {
    const int best = model.log.best_epoch;
    if (best >= 0 && best < static_cast<int>(model.log.train_loss.size())) {
      out << "Loss:\n  train = " << fixed(model.log.train_loss[best], 4)
          << ",  validation = " << fixed(model.log.valid_loss[best], 4) << "\n\n";
    }
  }
  out << "Elapsed time: " << fixed(model.log.elapsed_seconds / 60.0, 2)
      << " minutes\n";
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Semi-parametric quantile regression with spline mixtures", "spqr"};
  app.require_subcommand(1);

  // fit
  std::string config_path, data_path, out_path, method, response;
  std::optional<std::uint64_t> seed;
  bool show_model = false, quiet = false;
  auto* fit = app.add_subcommand("fit", "Fit a model by MLE, MAP or MCMC");
  fit->add_option("--config", config_path, "JSON run configuration");
  fit->add_option("--data", data_path, "training CSV");
  fit->add_option("--response", response, "response column (default Y)");
  fit->add_option("--out", out_path, "model file to write");
  fit->add_option("--method", method, "MLE, MAP or MCMC");
  fit->add_option("--seed", seed, "random seed");
  fit->add_flag("--show-model", show_model, "print the layer table");
  fit->add_flag("--quiet", quiet, "no progress output");

  // predict
  PredictArgs pa;
  auto* predict = app.add_subcommand("predict", "Conditional PDF, CDF or quantiles");
  predict->add_option("--model", pa.model_path)->required();
  predict->add_option("--x", pa.x_path, "covariate CSV")->required();
  predict->add_option("--type", pa.type, "PDF, CDF or QF");
  predict->add_option("--grid", pa.grid, "comma-separated y values or tau levels");
  predict->add_option("--ci-level", pa.ci_level);
  predict->add_flag("--get-all", pa.get_all);
  predict->add_option("--response", pa.response, "column to ignore in --x");
  predict->add_option("--out", pa.out_path);

  // coef
  std::string coef_model, coef_x, coef_response, coef_out;
  auto* coef_cmd = app.add_subcommand("coef", "Spline coefficients theta(x)");
  coef_cmd->add_option("--model", coef_model)->required();
  coef_cmd->add_option("--x", coef_x)->required();
  coef_cmd->add_option("--response", coef_response);
  coef_cmd->add_option("--out", coef_out);

  // summary
  std::string sum_model, sum_data, sum_response = "Y";
  bool sum_show = false;
  auto* summary = app.add_subcommand("summary", "Print the fit summary");
  summary->add_option("--model", sum_model)->required();
  summary->add_option("--data", sum_data, "data for elpd estimates (MCMC)");
  summary->add_option("--response", sum_response);
  summary->add_flag("--show-model", sum_show);

  // qale
  std::string q_model, q_data, q_vars, q_tau, q_response = "Y", q_out;
  int n_bins = kDefaultBins;
  std::optional<double> q_ci;
  bool q_all = false;
  auto* qale_cmd = app.add_subcommand("qale", "Quantile accumulated local effects");
  qale_cmd->add_option("--model", q_model)->required();
  qale_cmd->add_option("--data", q_data, "covariate CSV")->required();
  qale_cmd->add_option("--var", q_vars, "one or two 1-based covariate indices")->required();
  qale_cmd->add_option("--tau", q_tau, "quantile levels (default 0.1,...,0.9)");
  qale_cmd->add_option("--n-bins", n_bins);
  qale_cmd->add_option("--ci-level", q_ci);
  qale_cmd->add_flag("--get-all", q_all);
  qale_cmd->add_option("--response", q_response, "column to ignore in --data");
  qale_cmd->add_option("--out", q_out);

  // qvi
  std::string v_model, v_data, v_vars, v_tau, v_response = "Y", v_out;
  int v_bins = kDefaultBins;
  std::optional<double> v_ci;
  bool v_all = false;
  auto* qvi_cmd = app.add_subcommand("qvi", "ALE-induced variable importance");
  qvi_cmd->add_option("--model", v_model)->required();
  qvi_cmd->add_option("--data", v_data)->required();
  qvi_cmd->add_option("--vars", v_vars, "1-based indices (default all)");
  qvi_cmd->add_option("--tau", v_tau);
  qvi_cmd->add_option("--n-bins", v_bins);
  qvi_cmd->add_option("--ci-level", v_ci);
  qvi_cmd->add_flag("--get-all", v_all);
  qvi_cmd->add_option("--response", v_response);
  qvi_cmd->add_option("--out", v_out);

  // gof
  std::string g_model, g_data, g_response = "Y", g_out;
  std::optional<double> g_ci;
  bool g_all = false;
  auto* gof = app.add_subcommand("gof", "PIT Q-Q table");
  gof->add_option("--model", g_model)->required();
  gof->add_option("--data", g_data)->required();
  gof->add_option("--response", g_response);
  gof->add_option("--ci-level", g_ci);
  gof->add_flag("--get-all", g_all);
  gof->add_option("--out", g_out);

  // trace
  std::string t_model, t_target = "loglik", t_x, t_window, t_out;
  std::optional<double> t_tau, t_y, t_ci;
  bool t_all = false;
  auto* trace = app.add_subcommand("trace", "Per-iteration MCMC trace");
  trace->add_option("--model", t_model)->required();
  trace->add_option("--target", t_target, "loglik, PDF, CDF or QF");
  trace->add_option("--x", t_x, "comma-separated covariate values");
  trace->add_option("--tau", t_tau);
  trace->add_option("--y", t_y);
  trace->add_option("--window", t_window, "first:last iteration (1-based)");
  trace->add_option("--ci-level", t_ci);
  trace->add_flag("--get-all", t_all);
  trace->add_option("--out", t_out);

  // cv
  std::string c_config, c_data, c_folds, c_lr, c_method, c_response, c_out;
  int nfold = 5;
  std::optional<std::uint64_t> c_seed;
  auto* cv = app.add_subcommand("cv", "K-fold cross-validation error");
  cv->add_option("--config", c_config);
  cv->add_option("--data", c_data);
  cv->add_option("--response", c_response);
  cv->add_option("--method", c_method);
  cv->add_option("--nfold", nfold);
  cv->add_option("--folds", c_folds, "CSV with a 'fold' column (1-based labels)");
  cv->add_option("--lr", c_lr, "comma-separated learning rates to try");
  cv->add_option("--seed", c_seed);
  cv->add_option("--out", c_out);

  // simulate
  Eigen::Index sim_n = 1000;
  std::uint64_t sim_seed = 919;
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "Beta benchmark data (X1,X2,X3,Y)");
  simulate->add_option("--n", sim_n);
  simulate->add_option("--seed", sim_seed);
  simulate->add_option("--out", sim_out);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*fit) {
      RunConfig cfg = config_path.empty() ? RunConfig{} : read_config(config_path);
      if (!data_path.empty()) cfg.data_path = data_path;
      if (!response.empty()) cfg.response = response;
      if (!out_path.empty()) cfg.output_path = out_path;
      if (!method.empty()) cfg.method = parse_method(method);
      if (seed.has_value()) cfg.seed = seed;
      return cmd_fit(cfg, show_model, quiet, out, err);
    }
    if (*predict) return cmd_predict(pa, out);
    if (*coef_cmd) return cmd_coef(coef_model, coef_x, coef_response, coef_out, out);
    if (*summary) {
      const FittedModel model = load_model(sum_model);
      std::optional<ElpdEstimate> elpd;
      if (!sum_data.empty() && model.is_bayesian()) {
        const Dataset raw = split_response(read_csv(sum_data), sum_response);
        check_covariate_count(model, raw.x);
        elpd = estimate_elpd(model, to_unit(model, raw));
      }
      print_summary(model, out, sum_show, elpd);
      return kExitOk;
    }
    if (*qale_cmd) {
      const FittedModel model = load_model(q_model);
      const Eigen::MatrixXd x = covariates(read_csv(q_data), q_response);
      check_covariate_count(model, x);
      const std::vector<int> vars = parse_indices(q_vars);
      const std::vector<double> tau = q_tau.empty() ? default_taus() : parse_number_list(q_tau);
      const ALEResult r = qale(model, x, vars, tau, n_bins, {q_ci, q_all});
      if (r.is_interaction()) {
        CsvWriter csv({"tau", "edge_1", "edge_2", "ale"});
        for (size_t t = 0; t < tau.size(); ++t) {
          for (size_t a = 0; a < r.bin_edges[0].size(); ++a) {
            for (size_t b = 0; b < r.bin_edges[1].size(); ++b) {
              csv.row(tau[t], r.bin_edges[0][a], r.bin_edges[1][b],
                      r.surface[t](static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
            }
          }
        }
        csv.emit(q_out, out);
        return kExitOk;
      }
      std::vector<std::string> header{"tau", "edge", "ale"};
      if (r.lower) {
        header.push_back("lower");
        header.push_back("upper");
      }
      if (q_all) {
        header.push_back("sample_id");
        header.push_back("value");
      }
      CsvWriter csv(header);
      for (size_t t = 0; t < tau.size(); ++t) {
        const auto tt = static_cast<Eigen::Index>(t);
        for (Eigen::Index e = 0; e < r.ale.rows(); ++e) {
          std::ostringstream prefix;
          prefix.precision(17);
          prefix << tau[t] << ',' << r.bin_edges[0][e] << ',' << r.ale(e, tt);
          if (r.lower) prefix << ',' << (*r.lower)(e, tt) << ',' << (*r.upper)(e, tt);
          if (!q_all) {
            csv.row(prefix.str());
            continue;
          }
          for (size_t s = 0; s < r.samples.size(); ++s) {
            csv.row(prefix.str(), s + 1, r.samples[s](e, tt));
          }
        }
      }
      csv.emit(q_out, out);
      return kExitOk;
    }
    if (*qvi_cmd) {
      reject(v_all, "--get-all", "qvi");
      const FittedModel model = load_model(v_model);
      const Eigen::MatrixXd x = covariates(read_csv(v_data), v_response);
      check_covariate_count(model, x);
      const std::vector<int> vars = v_vars.empty() ? std::vector<int>{} : parse_indices(v_vars);
      const std::vector<double> tau = v_tau.empty() ? default_taus() : parse_number_list(v_tau);
      const ImportanceResult r = qvi(model, x, vars, tau, v_bins, v_ci);
      std::vector<std::string> header{"var", "tau", "vi", "kind"};
      if (r.lower) {
        header.push_back("lower");
        header.push_back("upper");
      }
      CsvWriter csv(header);
      for (size_t v = 0; v < r.var_index.size(); ++v) {
        for (size_t t = 0; t < tau.size(); ++t) {
          const auto vv = static_cast<Eigen::Index>(v);
          const auto tt = static_cast<Eigen::Index>(t);
          if (r.lower) {
            csv.row(r.var_index[v] + 1, tau[t], r.vi(vv, tt), to_string(r.kind[v]),
                    (*r.lower)(vv, tt), (*r.upper)(vv, tt));
          } else {
            csv.row(r.var_index[v] + 1, tau[t], r.vi(vv, tt), to_string(r.kind[v]));
          }
        }
      }
      csv.emit(v_out, out);
      return kExitOk;
    }
    if (*gof) {
      reject(g_ci.has_value(), "--ci-level", "gof");
      const FittedModel model = load_model(g_model);
      const Dataset raw = split_response(read_csv(g_data), g_response);
      check_covariate_count(model, raw.x);
      const PitResult r = pit(model, raw.x, raw.y, g_all);
      CsvWriter csv({"sample_id", "uniform", "pit"});
      for (Eigen::Index i = 0; i < r.u.size(); ++i) csv.row(0, r.uniform[i], r.sorted_u[i]);
      for (size_t s = 0; s < r.sample_sorted_u.size(); ++s) {
        for (Eigen::Index i = 0; i < r.u.size(); ++i) {
          csv.row(s + 1, r.uniform[i], r.sample_sorted_u[s][i]);
        }
      }
      csv.emit(g_out, out);
      err << "KS distance: " << fixed(ks_distance(r.u), 4) << '\n';
      return kExitOk;
    }
    if (*trace) {
      reject(t_ci.has_value(), "--ci-level", "trace");
      reject(t_all, "--get-all", "trace");
      const FittedModel model = load_model(t_model);
      if (!model.is_bayesian()) {
        throw CapabilityError("trace requires an MCMC fit; this model was fitted by " +
                              to_string(model.method));
      }
      int first = 1, last = std::numeric_limits<int>::max();
      if (!t_window.empty()) {
        const size_t colon = t_window.find(':');
        if (colon == std::string::npos) throw ValidationError("--window must be first:last");
        first = std::stoi(t_window.substr(0, colon));
        last = std::stoi(t_window.substr(colon + 1));
        if (first < 1 || last < first) throw ValidationError("invalid --window");
      }
      CsvWriter csv({"iteration", "value"});
      if (t_target == "loglik") {
        const auto& ll = model.log.iter_loglik;
        for (size_t i = 0; i < ll.size(); ++i) {
          const int it = static_cast<int>(i) + 1;
          if (it >= first && it <= last) csv.row(it, ll[i]);
        }
      } else {
        const CurveKind kind = parse_curve_kind(t_target);
        if (t_x.empty()) throw ValidationError("--x is required for this target");
        const std::vector<double> xv = parse_number_list(t_x);
        Eigen::MatrixXd x(1, static_cast<Eigen::Index>(xv.size()));
        for (size_t j = 0; j < xv.size(); ++j) x(0, static_cast<Eigen::Index>(j)) = xv[j];
        check_covariate_count(model, x);
        PredictOptions opt;
        opt.get_all = true;
        if (kind == CurveKind::kQF) {
          if (!t_tau) throw ValidationError("--tau is required for target QF");
          opt.grid = std::vector<double>{*t_tau};
        } else {
          if (!t_y) throw ValidationError("--y is required for target " + t_target);
          opt.grid = std::vector<double>{*t_y};
        }
        const PredictionResult r = predict_curves(model, x, kind, opt);
        for (size_t s = 0; s < r.samples.size(); ++s) {
          const int it = model.log.warmup + (static_cast<int>(s) + 1) * model.log.thin;
          if (it >= first && it <= last) csv.row(it, r.samples[s](0, 0));
        }
      }
      csv.emit(t_out, out);
      return kExitOk;
    }
    if (*cv) {
      RunConfig cfg = c_config.empty() ? RunConfig{} : read_config(c_config);
      if (!c_data.empty()) cfg.data_path = c_data;
      if (!c_response.empty()) cfg.response = c_response;
      if (!c_method.empty()) cfg.method = parse_method(c_method);
      if (c_seed.has_value()) cfg.seed = c_seed;
      if (cfg.method == Method::kMCMC) {
        throw CapabilityError("cross-validation is only applicable to MLE and MAP");
      }
      const Prepared p = prepare(cfg);
      const std::uint64_t base = resolve_seed(cfg.seed);
      const FoldAssignment folds = c_folds.empty()
                                       ? create_folds(p.data.size(), nfold, base)
                                       : read_fold_file(c_folds, p.data.size());
      std::vector<double> rates = c_lr.empty() ? std::vector<double>{cfg.train.lr}
                                               : parse_number_list(c_lr);
      CsvWriter csv({"lr", "fold", "cve"});
      for (double lr : rates) {
        TrainControl control = cfg.train;
        control.lr = lr;
        control.seed = base;
        std::optional<PriorConfig> prior;
        if (cfg.method == Method::kMAP) prior = cfg.prior;
        const CvResult r = cv_error(p.data, p.shape, p.basis, cfg.method, prior,
                                    control, folds);
        for (size_t f = 0; f < r.fold_error.size(); ++f) csv.row(lr, f + 1, r.fold_error[f]);
        csv.row(lr, 0, r.mean);
      }
      csv.emit(c_out, out);
      return kExitOk;
    }
    if (*simulate) {
      const Dataset d = simulate_beta(sim_n, sim_seed);
      Table t;
      t.header = {"X1", "X2", "X3", "Y"};
      t.values.resize(d.x.rows(), 4);
      t.values.leftCols(3) = d.x;
      t.values.col(3) = d.y;
      std::ostringstream body;
      write_csv(body, t);
      if (sim_out.empty()) {
        out << body.str();
      } else {
        write_file_atomic(sim_out, body.str());
      }
      return kExitOk;
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const CapabilityError& e) {
    err << "error: " << e.what() << '\n';
    return kExitCapability;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitValidation;
}

}  // namespace spqr
