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

#include "spqr/model.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spqr/errors.h"

namespace spqr {

std::string to_string(Method method) {
  switch (method) {
    case Method::kMLE:
      return "MLE";
    case Method::kMAP:
      return "MAP";
    case Method::kMCMC:
      return "MCMC";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "MLE") return Method::kMLE;
  if (name == "MAP") return Method::kMAP;
  if (name == "MCMC") return Method::kMCMC;
  throw ValidationError("unknown method '" + name +
                        "' (expected MLE, MAP or MCMC)");
}

std::string to_string(CurveKind kind) {
  switch (kind) {
    case CurveKind::kPDF:
      return "PDF";
    case CurveKind::kCDF:
      return "CDF";
    case CurveKind::kQF:
      return "QF";
  }
  return "?";
}

CurveKind parse_curve_kind(const std::string& name) {
  if (name == "PDF") return CurveKind::kPDF;
  if (name == "CDF") return CurveKind::kCDF;
  if (name == "QF") return CurveKind::kQF;
  throw ValidationError("unknown curve type '" + name +
                        "' (expected PDF, CDF or QF)");
}

Normalization Normalization::from_data(const Eigen::MatrixXd& x,
                                       const Eigen::VectorXd& y) {
  Normalization n;
  n.enabled = true;
  n.x_min = x.colwise().minCoeff().transpose();
  n.x_max = x.colwise().maxCoeff().transpose();
  n.y_min = y.minCoeff();
  n.y_max = y.maxCoeff();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (!(n.x_max[j] > n.x_min[j])) {
      std::ostringstream msg;
      msg << "covariate column " << j + 1 << " is constant; cannot normalize";
      throw ValidationError(msg.str());
    }
  }
  if (!(n.y_max > n.y_min)) {
    throw ValidationError("response is constant; cannot normalize");
  }
  return n;
}

Eigen::MatrixXd Normalization::x_to_unit(const Eigen::MatrixXd& x,
                                         bool* clamped) const {
  if (!enabled) return x;
  if (x.cols() != x_min.size()) {
    throw ValidationError("covariate count does not match the normalization");
  }
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double width = x_max[j] - x_min[j];
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double u = (x(i, j) - x_min[j]) / width;
      if (u < 0.0 || u > 1.0) {
        u = std::clamp(u, 0.0, 1.0);
        if (clamped != nullptr) *clamped = true;
      }
      out(i, j) = u;
    }
  }
  return out;
}

double Normalization::y_to_unit(double y, bool* clamped) const {
  if (!enabled) {
    if (!(y >= 0.0 && y <= 1.0)) {
      std::ostringstream msg;
      msg << "response value " << y << " outside [0,1]";
      throw DomainError(msg.str());
    }
    return y;
  }
  double u = (y - y_min) / (y_max - y_min);
  if (u < 0.0 || u > 1.0) {
    u = std::clamp(u, 0.0, 1.0);
    if (clamped != nullptr) *clamped = true;
  }
  return u;
}

double Normalization::y_from_unit(double u) const {
  return enabled ? y_min + (y_max - y_min) * u : u;
}

void FittedModel::validate() const {
  shape.validate();
  if (shape.outputs != basis.size()) {
    throw ValidationError("network output width does not match basis size");
  }
  if (weights.empty()) throw ValidationError("model has no weights");
  if (method != Method::kMCMC && weights.size() != 1) {
    throw ValidationError("point-estimate model must hold one weight set");
  }
  const WeightSet reference(shape);
  for (const WeightSet& w : weights) {
    if (!w.same_layout(reference) || w.size() != reference.size()) {
      throw ValidationError("stored weights do not match the network shape");
    }
  }
  if (normalization.enabled && normalization.x_min.size() != shape.inputs) {
    throw ValidationError("normalization does not match covariate count");
  }
}

Mixture::Mixture(const SplineBasis& basis, Eigen::VectorXd theta)
    : basis_(&basis), theta_(std::move(theta)) {
  const int k = basis.size();
  prefix_.resize(k + 1);
  prefix_[0] = 0.0;
  for (int j = 0; j < k; ++j) prefix_[j + 1] = prefix_[j] + theta_[j];
  knot_cdf_.resize(k);
  for (int j = 0; j < k; ++j) knot_cdf_[j] = cdf(basis.distinct_knot(j));
}

double Mixture::pdf(double y) const {
  const SplineBasis::Local loc = basis_->local_m(y);
  return theta_[loc.interval] * loc.first +
         theta_[loc.interval + 1] * loc.second;
}

double Mixture::cdf(double y) const {
  const SplineBasis::Local loc = basis_->local_i(y);
  return prefix_[loc.interval] + theta_[loc.interval] * loc.first +
         theta_[loc.interval + 1] * loc.second;
}

double Mixture::quantile(double tau) const {
  if (!(tau > 0.0 && tau < 1.0)) {
    std::ostringstream msg;
    msg << "quantile level " << tau << " outside (0,1)";
    throw DomainError(msg.str());
  }
  const int last = basis_->size() - 2;
  // Largest knot interval whose left-end CDF does not exceed tau.
  const auto it = std::upper_bound(knot_cdf_.data(),
                                   knot_cdf_.data() + last + 1, tau);
  const int j = std::max(0, static_cast<int>(it - knot_cdf_.data()) - 1);
  double lo = basis_->distinct_knot(j);
  double hi = basis_->distinct_knot(j + 1);
  for (int iter = 0; iter < kQuantileMaxIterations; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (cdf(mid) < tau) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

namespace {

void check_covariates(const FittedModel& model, Eigen::Index cols) {
  if (cols != model.shape.inputs) {
    std::ostringstream msg;
    msg << "model expects " << model.shape.inputs << " covariates, got "
        << cols;
    throw ValidationError(msg.str());
  }
}

Eigen::MatrixXd as_row(const Eigen::VectorXd& x) { return x.transpose(); }

void require_bayesian(const FittedModel& model, const std::string& what) {
  if (!model.is_bayesian()) {
    throw CapabilityError(what + " requires an MCMC fit; this model was fitted by " +
                          to_string(model.method));
  }
}

}  // namespace

double pdf(const FittedModel& model, const Eigen::VectorXd& x, double y) {
  check_covariates(model, x.size());
  const Eigen::MatrixXd row = as_row(x);
  double total = 0.0;
  for (const WeightSet& w : model.weights) {
    const Eigen::MatrixXd theta = forward_batch(model.shape, w, row);
    total += Mixture(model.basis, theta.row(0).transpose()).pdf(y);
  }
  return total / model.num_samples();
}

double cdf(const FittedModel& model, const Eigen::VectorXd& x, double y) {
  check_covariates(model, x.size());
  const Eigen::MatrixXd row = as_row(x);
  double total = 0.0;
  for (const WeightSet& w : model.weights) {
    const Eigen::MatrixXd theta = forward_batch(model.shape, w, row);
    total += Mixture(model.basis, theta.row(0).transpose()).cdf(y);
  }
  return total / model.num_samples();
}

double quantile(const FittedModel& model, const Eigen::VectorXd& x,
                double tau) {
  check_covariates(model, x.size());
  const Eigen::MatrixXd row = as_row(x);
  double total = 0.0;
  for (const WeightSet& w : model.weights) {
    const Eigen::MatrixXd theta = forward_batch(model.shape, w, row);
    total += Mixture(model.basis, theta.row(0).transpose()).quantile(tau);
  }
  return total / model.num_samples();
}

Eigen::VectorXd coef(const FittedModel& model, const Eigen::VectorXd& x) {
  check_covariates(model, x.size());
  const Eigen::MatrixXd row = as_row(x);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(model.basis.size());
  for (const WeightSet& w : model.weights) {
    total += forward_batch(model.shape, w, row).row(0).transpose();
  }
  return total / model.num_samples();
}

std::vector<double> default_grid(const FittedModel& model, CurveKind kind) {
  std::vector<double> grid;
  if (kind == CurveKind::kQF) {
    for (int i = 1; i <= 99; ++i) grid.push_back(i / 100.0);
  } else {
    for (int i = 0; i <= 100; ++i) {
      grid.push_back(model.normalization.y_from_unit(i / 100.0));
    }
  }
  return grid;
}

double empirical_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw ValidationError("empirical quantile of no values");
  const double h = (sorted.size() - 1) * p;
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

namespace {

// Curves of one weight draw on the data scale. `unit_grid` holds the grid on
// the model scale (y for PDF/CDF, tau for QF).
Eigen::MatrixXd curves_for_draw(const FittedModel& model, const WeightSet& w,
                                const Eigen::MatrixXd& x_unit, CurveKind kind,
                                const std::vector<double>& unit_grid) {
  const Eigen::MatrixXd theta = forward_batch(model.shape, w, x_unit);
  Eigen::MatrixXd out(x_unit.rows(), static_cast<Eigen::Index>(unit_grid.size()));
  const double jacobian = 1.0 / model.normalization.y_width();
  for (Eigen::Index i = 0; i < x_unit.rows(); ++i) {
    const Mixture mix(model.basis, theta.row(i).transpose());
    for (size_t g = 0; g < unit_grid.size(); ++g) {
      double v = 0.0;
      switch (kind) {
        case CurveKind::kPDF:
          v = mix.pdf(unit_grid[g]) * jacobian;
          break;
        case CurveKind::kCDF:
          v = mix.cdf(unit_grid[g]);
          break;
        case CurveKind::kQF:
          v = model.normalization.y_from_unit(mix.quantile(unit_grid[g]));
          break;
      }
      out(i, static_cast<Eigen::Index>(g)) = v;
    }
  }
  return out;
}

}  // namespace

PredictionResult predict_curves(const FittedModel& model,
                                const Eigen::MatrixXd& x, CurveKind kind,
                                const PredictOptions& options) {
  if (options.ci_level.has_value()) {
    require_bayesian(model, "ci_level");
    const double level = *options.ci_level;
    if (!(level > 0.0 && level < 1.0)) {
      throw ValidationError("ci_level must lie in (0,1)");
    }
  }
  if (options.get_all) require_bayesian(model, "get_all");
  check_covariates(model, x.cols());

  PredictionResult result;
  result.grid = options.grid.value_or(default_grid(model, kind));
  std::vector<double> unit_grid;
  unit_grid.reserve(result.grid.size());
  for (double g : result.grid) {
    if (kind == CurveKind::kQF) {
      if (!(g > 0.0 && g < 1.0)) {
        std::ostringstream msg;
        msg << "quantile level " << g << " outside (0,1)";
        throw DomainError(msg.str());
      }
      unit_grid.push_back(g);
    } else {
      unit_grid.push_back(model.normalization.y_to_unit(g, &result.clamped));
    }
  }
  const Eigen::MatrixXd x_unit = model.normalization.x_to_unit(x, &result.clamped);

  const int num_draws = model.num_samples();
  std::vector<Eigen::MatrixXd> draws;
  draws.reserve(num_draws);
  result.mean = Eigen::MatrixXd::Zero(x.rows(), static_cast<Eigen::Index>(unit_grid.size()));
  for (const WeightSet& w : model.weights) {
    draws.push_back(curves_for_draw(model, w, x_unit, kind, unit_grid));
    result.mean += draws.back();
  }
  result.mean /= num_draws;

  if (options.ci_level.has_value()) {
    const double alpha = 0.5 * (1.0 - *options.ci_level);
    result.lower.emplace(result.mean.rows(), result.mean.cols());
    result.upper.emplace(result.mean.rows(), result.mean.cols());
    std::vector<double> values(num_draws);
    for (Eigen::Index i = 0; i < result.mean.rows(); ++i) {
      for (Eigen::Index g = 0; g < result.mean.cols(); ++g) {
        for (int s = 0; s < num_draws; ++s) values[s] = draws[s](i, g);
        std::sort(values.begin(), values.end());
        (*result.lower)(i, g) = empirical_quantile(values, alpha);
        (*result.upper)(i, g) = empirical_quantile(values, 1.0 - alpha);
      }
    }
  }
  if (options.get_all) result.samples = std::move(draws);
  return result;
}

Eigen::MatrixXd predict_quantiles(const FittedModel& model,
                                  const Eigen::MatrixXd& x,
                                  const std::vector<double>& taus,
                                  int sample) {
  check_covariates(model, x.cols());
  const Eigen::MatrixXd x_unit = model.normalization.x_to_unit(x, nullptr);
  if (sample >= 0) {
    return curves_for_draw(model, model.weights.at(sample), x_unit,
                           CurveKind::kQF, taus);
  }
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(x.rows(), static_cast<Eigen::Index>(taus.size()));
  for (const WeightSet& w : model.weights) {
    total += curves_for_draw(model, w, x_unit, CurveKind::kQF, taus);
  }
  return total / model.num_samples();
}

Eigen::VectorXd predict_cdf_pointwise(const FittedModel& model,
                                      const Eigen::MatrixXd& x,
                                      const Eigen::VectorXd& y, int sample) {
  check_covariates(model, x.cols());
  if (x.rows() != y.size()) {
    throw ValidationError("covariate rows do not match response length");
  }
  const Eigen::MatrixXd x_unit = model.normalization.x_to_unit(x, nullptr);
  std::vector<double> y_unit(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    y_unit[i] = model.normalization.y_to_unit(y[i], nullptr);
  }
  Eigen::VectorXd total = Eigen::VectorXd::Zero(y.size());
  const int first = sample >= 0 ? sample : 0;
  const int last = sample >= 0 ? sample + 1 : model.num_samples();
  for (int s = first; s < last; ++s) {
    const Eigen::MatrixXd theta =
        forward_batch(model.shape, model.weights.at(s), x_unit);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      total[i] += Mixture(model.basis, theta.row(i).transpose()).cdf(y_unit[i]);
    }
  }
  return total / (last - first);
}

}  // namespace spqr
