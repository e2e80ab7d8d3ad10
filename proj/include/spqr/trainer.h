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

#ifndef SPQR_TRAINER_H_
#define SPQR_TRAINER_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spqr/model.h"

namespace spqr {

struct TrainControl {
  double lr = 0.01;
  int batch_size = 128;
  int epochs = 200;
  double valid_pct = 0.2;
  int early_stopping_epochs = 10;
  // Inverted dropout on the first hidden layer and on deeper hidden layers.
  double dropout_input = 0.0;
  double dropout_hidden = 0.0;
  bool batchnorm = false;  // not supported; rejected by validate()
  int print_every = 10;    // epochs between progress lines; 0 disables
  std::optional<std::uint64_t> seed;
  std::string checkpoint_path;    // best model is rewritten here when set
  std::ostream* progress = nullptr;

  void validate() const;
};

// Adam with the usual constants. Parameters and gradients are flat vectors.
struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(Eigen::Index n)
      : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}

  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long t = 0;
};

// One bias-corrected Adam update of `params` in place (minimization).
void adam_step(AdamState& state, Eigen::VectorXd& params,
               const Eigen::VectorXd& grads, double lr);

// Disjoint index sets covering 0..n-1.
using FoldAssignment = std::vector<std::vector<Eigen::Index>>;

// Seeded shuffle dealt into nfold folds whose sizes differ by at most one.
FoldAssignment create_folds(Eigen::Index n, int nfold, std::uint64_t seed);
// Throws ValidationError unless `folds` partitions 0..n-1.
void check_folds(const FoldAssignment& folds, Eigen::Index n);

// Resolves an absent seed to a fresh nondeterministic one.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed);

// Data must already be on the unit scale; `normalization` is only recorded in
// the returned model (and in checkpoints).
FittedModel fit_mle(const Dataset& data, const NetworkShape& shape,
                    const SplineBasis& basis, const TrainControl& control,
                    const Normalization& normalization = {});

FittedModel fit_map(const Dataset& data, const NetworkShape& shape,
                    const SplineBasis& basis, const PriorConfig& prior,
                    const TrainControl& control,
                    const Normalization& normalization = {});

// The MAP training objective in the non-centered parameterization
// W = sigma * lambda * Z. The parameter vector is Z (flat, WeightSet layout)
// followed by the logs of the free variances in free_scales() order. The loss
// of a batch B is
//   -(1/|B|) sum_{i in B} log f(y_i | x_i)
//     - (1/n) [ sum log N(Z; 0, 1) + sum log IG(variance) ],
// n being the training size.
class MapObjective {
 public:
  MapObjective(const Likelihood& likelihood, const PriorConfig& prior,
               Eigen::Index num_train);

  Eigen::Index size() const { return num_weights_ + static_cast<Eigen::Index>(layout_.size()); }
  // Parameters representing weights `w` with every free variance at one.
  Eigen::VectorXd initial_params(const WeightSet& w) const;
  WeightSet weights(const Eigen::VectorXd& params) const;
  ScaleState scales(const Eigen::VectorXd& params) const;

  // Batch loss; fills `grad` (size()) when given. `value` receives the raw
  // likelihood result of the batch.
  double loss(const Eigen::VectorXd& params, std::span<const Eigen::Index> rows,
              Eigen::VectorXd* grad, const DropoutMasks* masks = nullptr,
              LikelihoodValue* value = nullptr) const;

 private:
  const Likelihood* likelihood_;
  PriorConfig prior_;
  Eigen::Index num_train_;
  NetworkShape shape_;
  std::vector<LayerDims> dims_;
  std::vector<FreeScale> layout_;
  Eigen::Index num_weights_;
};

struct CvResult {
  std::vector<double> fold_error;  // mean negative log-likelihood per fold
  double mean = 0.0;
};

// Trains on the complement of each fold and scores the held-out fold.
using Fitter = std::function<FittedModel(const Dataset& train, int fold)>;
CvResult cv_error(const Dataset& data, const FoldAssignment& folds,
                  const Fitter& fitter);

// Convenience form for MLE (prior absent) or MAP. Fold f trains with a seed
// derived from control.seed and f.
CvResult cv_error(const Dataset& data, const NetworkShape& shape,
                  const SplineBasis& basis, Method method,
                  const std::optional<PriorConfig>& prior,
                  const TrainControl& control, const FoldAssignment& folds);

// Mean negative log-likelihood of unit-scale data under a point or posterior
// model (posterior: log of the averaged density).
double mean_nll(const FittedModel& model, const Dataset& data);

}  // namespace spqr

#endif  // SPQR_TRAINER_H_
