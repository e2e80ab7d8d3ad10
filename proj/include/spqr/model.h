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

#ifndef SPQR_MODEL_H_
#define SPQR_MODEL_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spqr/basis.h"
#include "spqr/network.h"
#include "spqr/priors.h"

namespace spqr {

enum class Method { kMLE, kMAP, kMCMC };

std::string to_string(Method method);
Method parse_method(const std::string& name);

// Min-max transform between the data scale and the model's [0,1] scale.
struct Normalization {
  bool enabled = false;
  Eigen::VectorXd x_min;
  Eigen::VectorXd x_max;
  double y_min = 0.0;
  double y_max = 1.0;

  // Records the ranges of x and y; throws ValidationError on a constant
  // column or response.
  static Normalization from_data(const Eigen::MatrixXd& x,
                                 const Eigen::VectorXd& y);

  double y_width() const { return enabled ? y_max - y_min : 1.0; }
  // Data scale to model scale. Values outside the recorded ranges are clamped
  // and `clamped` (if given) is set.
  Eigen::MatrixXd x_to_unit(const Eigen::MatrixXd& x, bool* clamped) const;
  double y_to_unit(double y, bool* clamped) const;
  double y_from_unit(double u) const;

  bool operator==(const Normalization&) const = default;
};

// Diagnostics recorded while fitting. Point estimates fill the epoch traces;
// MCMC fills the iteration traces.
struct TrainingLog {
  // MLE / MAP
  double learning_rate = 0.0;
  int batch_size = 0;
  std::vector<double> train_loss;  // mean negative log-likelihood per epoch
  std::vector<double> valid_loss;
  std::vector<double> epoch_seconds;  // in memory only
  int best_epoch = -1;                // 0-based

  // MCMC
  std::string algorithm;
  double target_accept = 0.0;
  double step_size = 0.0;
  std::vector<double> iter_loglik;  // every iteration, warmup included
  std::vector<double> iter_accept;
  std::vector<int> iter_depth;      // NUTS tree depth or HMC leapfrog count
  std::vector<int> iter_divergent;
  int warmup = 0;
  int thin = 1;
  int divergences = 0;              // post-warmup
  double mean_accept = 0.0;         // post-warmup
  std::vector<double> sample_loglik;  // one per stored sample

  double elapsed_seconds = 0.0;  // in memory only
};

// Everything needed to predict.
struct FittedModel {
  NetworkShape shape;
  SplineBasis basis{10};
  Method method = Method::kMLE;
  // One set for MLE/MAP; the S stored posterior draws for MCMC.
  std::vector<WeightSet> weights;
  Normalization normalization;
  std::optional<PriorConfig> prior;
  TrainingLog log;
  std::uint64_t seed = 0;

  int num_samples() const { return static_cast<int>(weights.size()); }
  bool is_bayesian() const { return method == Method::kMCMC; }
  void validate() const;
};

// The mixture density sum_k theta_k M_k(y) for one probability vector, with
// its CDF and quantile function.
class Mixture {
 public:
  Mixture(const SplineBasis& basis, Eigen::VectorXd theta);

  double pdf(double y) const;
  double cdf(double y) const;
  // Bisection on the knot interval that brackets tau; monotone in tau.
  double quantile(double tau) const;

 private:
  const SplineBasis* basis_;
  Eigen::VectorXd theta_;
  Eigen::VectorXd prefix_;      // prefix_[j] = theta_0 + ... + theta_{j-1}
  Eigen::VectorXd knot_cdf_;    // cdf at the distinct knots
};

inline constexpr int kQuantileMaxIterations = 60;
inline constexpr double kQuantileTolerance = 1e-8;

// Model-scale (unit interval) queries. For MCMC models pdf/cdf/coef average
// over the stored draws and quantile averages per-draw quantiles.
double pdf(const FittedModel& model, const Eigen::VectorXd& x, double y);
double cdf(const FittedModel& model, const Eigen::VectorXd& x, double y);
double quantile(const FittedModel& model, const Eigen::VectorXd& x, double tau);
Eigen::VectorXd coef(const FittedModel& model, const Eigen::VectorXd& x);

enum class CurveKind { kPDF, kCDF, kQF };

std::string to_string(CurveKind kind);
CurveKind parse_curve_kind(const std::string& name);

struct PredictOptions {
  std::optional<std::vector<double>> grid;  // y values, or tau levels for QF
  std::optional<double> ci_level;
  bool get_all = false;
};

struct PredictionResult {
  std::vector<double> grid;
  Eigen::MatrixXd mean;                 // rows x grid
  std::optional<Eigen::MatrixXd> lower;
  std::optional<Eigen::MatrixXd> upper;
  std::vector<Eigen::MatrixXd> samples;  // one rows x grid matrix per draw
  bool clamped = false;
};

// Default abscissae: 101 points on [0,1] (mapped to the data scale when the
// model is normalized), or tau = 0.01, ..., 0.99 for quantiles.
std::vector<double> default_grid(const FittedModel& model, CurveKind kind);

// PDF/CDF/QF curves for covariate rows on the data scale. ci_level and
// get_all require an MCMC model (CapabilityError otherwise).
PredictionResult predict_curves(const FittedModel& model,
                                const Eigen::MatrixXd& x, CurveKind kind,
                                const PredictOptions& options = {});

// Data-scale conditional quantiles, rows x taus. `sample` selects one stored
// draw; -1 averages per-draw quantiles over all draws.
Eigen::MatrixXd predict_quantiles(const FittedModel& model,
                                  const Eigen::MatrixXd& x,
                                  const std::vector<double>& taus,
                                  int sample = -1);

// Data-scale F(y_i | x_i) for paired rows. `sample` as above; -1 averages.
Eigen::VectorXd predict_cdf_pointwise(const FittedModel& model,
                                      const Eigen::MatrixXd& x,
                                      const Eigen::VectorXd& y,
                                      int sample = -1);

// Type-7 (linear interpolation) empirical quantile of sorted values.
double empirical_quantile(const std::vector<double>& sorted, double p);

}  // namespace spqr

#endif  // SPQR_MODEL_H_
