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

#ifndef SPQR_INTERPRET_H_
#define SPQR_INTERPRET_H_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spqr/model.h"

namespace spqr {

// Quantile predictions for covariate rows: returns rows x taus.
using QuantileFn = std::function<Eigen::MatrixXd(const Eigen::MatrixXd& x,
                                                 const std::vector<double>& taus)>;

inline constexpr int kDefaultBins = 40;
// Covariates with at most this many distinct values use the range rule in
// qvi().
inline constexpr int kDiscreteLevels = 10;

// Accumulated local effects of one covariate (main) or a pair (interaction).
//
// Main effects are stored at the bin edges: ale is n_edges x n_tau. The
// curve is centered so that the count-weighted mean of its bin averages
// (the mean of the two edge values of each bin) is zero.
//
// Interaction effects are stored per tau as n_edges_j x n_edges_l surfaces
// with the main effects and the grand mean removed.
struct ALEResult {
  std::vector<int> var_index;
  std::vector<std::vector<double>> bin_edges;
  std::vector<double> tau;
  Eigen::MatrixXd ale;                 // main effects
  std::vector<Eigen::MatrixXd> surface;  // interaction, one per tau
  std::vector<double> counts;          // main: observations per bin
  Eigen::MatrixXd cell_counts;         // interaction: bins_j x bins_l
  std::optional<Eigen::MatrixXd> lower;
  std::optional<Eigen::MatrixXd> upper;
  std::vector<Eigen::MatrixXd> samples;  // per posterior draw, like ale

  bool is_interaction() const { return var_index.size() == 2; }
};

// Edges: the minimum followed by the type-1 sample quantiles at k/n_bins,
// duplicates removed.
std::vector<double> ale_edges(const Eigen::VectorXd& x, int n_bins);
// Bin of each value (0-based); bins are right-closed and the first also
// holds the minimum.
std::vector<int> ale_bins(const Eigen::VectorXd& x, const std::vector<double>& edges);

ALEResult qale_main(const QuantileFn& predict, const Eigen::MatrixXd& x, int j,
                    const std::vector<double>& tau, int n_bins = kDefaultBins);
ALEResult qale_interaction(const QuantileFn& predict, const Eigen::MatrixXd& x,
                           int j, int l, const std::vector<double>& tau,
                           int n_bins = kDefaultBins);

struct ALEOptions {
  std::optional<double> ci_level;
  bool get_all = false;
};

// Model forms; x is on the data scale. One index gives a main effect, two an
// interaction. Uncertainty options need an MCMC model and a single index.
ALEResult qale(const FittedModel& model, const Eigen::MatrixXd& x,
               const std::vector<int>& var_index, const std::vector<double>& tau,
               int n_bins = kDefaultBins, const ALEOptions& options = {});

// Per-bin averages of a main-effect curve (n_bins x n_tau).
Eigen::MatrixXd ale_bin_means(const ALEResult& result);

enum class ImportanceKind { kSD, kRange };
std::string to_string(ImportanceKind kind);

struct ImportanceResult {
  std::vector<int> var_index;
  std::vector<double> tau;
  Eigen::MatrixXd vi;  // n_var x n_tau
  std::vector<ImportanceKind> kind;
  std::optional<Eigen::MatrixXd> lower;
  std::optional<Eigen::MatrixXd> upper;
};

// Spread of one main-effect ALE column: count-weighted SD of the bin
// averages, or max - min of the curve for discrete covariates.
double ale_importance(const ALEResult& main, int tau_index, ImportanceKind kind);
ImportanceKind importance_kind(const Eigen::VectorXd& x);

ImportanceResult qvi(const QuantileFn& predict, const Eigen::MatrixXd& x,
                     const std::vector<int>& var_index,
                     const std::vector<double>& tau, int n_bins = kDefaultBins);
// Empty var_index means every covariate. With ci_level (MCMC only) the VI is
// computed per draw and summarized by its mean and pointwise quantiles.
ImportanceResult qvi(const FittedModel& model, const Eigen::MatrixXd& x,
                     std::vector<int> var_index, const std::vector<double>& tau,
                     int n_bins = kDefaultBins,
                     std::optional<double> ci_level = std::nullopt);

struct PitResult {
  Eigen::VectorXd u;           // F(y_i | x_i)
  Eigen::VectorXd sorted_u;
  Eigen::VectorXd uniform;     // plotting positions (i - 0.5)/n
  std::vector<Eigen::VectorXd> sample_sorted_u;  // get_all, per draw
};

// x and y on the data scale.
PitResult pit(const FittedModel& model, const Eigen::MatrixXd& x,
              const Eigen::VectorXd& y, bool get_all = false);
// Kolmogorov-Smirnov distance of a sample from U(0,1).
double ks_distance(const Eigen::VectorXd& u);

struct WaicResult {
  double elpd = 0.0;
  double lpd = 0.0;
  double penalty = 0.0;
  Eigen::VectorXd pointwise;  // per-observation elpd
};

struct LooResult {
  double elpd = 0.0;
  Eigen::VectorXd pointwise;
};

// loglik is S x n (draws by observations); S >= 2.
WaicResult waic(const Eigen::MatrixXd& loglik);
LooResult loo_is(const Eigen::MatrixXd& loglik);

// S x n log densities of unit-scale data under each stored draw.
Eigen::MatrixXd pointwise_loglik(const FittedModel& model, const Dataset& data);

}  // namespace spqr

#endif  // SPQR_INTERPRET_H_
