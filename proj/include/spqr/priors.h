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

#ifndef SPQR_PRIORS_H_
#define SPQR_PRIORS_H_

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spqr/network.h"

namespace spqr {

enum class PriorKind { kGP, kARD, kGSM };

std::string to_string(PriorKind kind);
PriorKind parse_prior(const std::string& name);

// Inverse-gamma hyperpriors on the squared scales: lambda^2 ~ IG(a_lambda,
// b_lambda) and, for GSM only, sigma^2 ~ IG(a_sigma, b_sigma).
struct PriorConfig {
  PriorKind kind = PriorKind::kGP;
  double a_lambda = 0.001;
  double b_lambda = 0.001;
  double a_sigma = 0.001;
  double b_sigma = 0.001;

  void validate() const;
  bool operator==(const PriorConfig&) const = default;
};

// Effective variances of the hierarchical normal prior
//   W_ij^(l) ~ N(0, sigma2[l] * lambda2[l][j]),
// where j = 0 is the bias column. Entries tied together by the prior's
// sharing pattern hold identical values.
struct ScaleState {
  std::vector<double> sigma2;
  std::vector<Eigen::VectorXd> lambda2;
};

// One free scale parameter (a variance) and the weight columns it governs.
//
//  GP : per layer a bias lambda_0^2 and one shared lambda^2 for the unit
//       columns; in layers l >= 2 the columns use lambda^2 / V_{l-1}.
//  ARD: layer 1 has one lambda_j^2 per input column; GP pattern elsewhere.
//  GSM: one lambda_j^2 per column in every layer plus a free sigma^2 per
//       layer.
// GP and ARD fix sigma^2 = 1.
struct FreeScale {
  enum class Kind { kSigma, kLambda };
  Kind kind = Kind::kLambda;
  int layer = 0;             // 0-based layer index
  std::vector<int> columns;  // governed columns (lambda only)
  double divisor = 1.0;      // effective lambda^2 = value / divisor
};

std::vector<FreeScale> free_scales(const std::vector<LayerDims>& dims,
                                   PriorKind kind);

// All free variances set to one (so GP/ARD deep layers start at 1/V).
ScaleState initial_scales(const std::vector<LayerDims>& dims, PriorKind kind);

// Read and write the free parameters of `scales` in free_scales() order.
std::vector<double> free_values(const std::vector<FreeScale>& layout,
                                const ScaleState& scales);
ScaleState scales_from_free(const std::vector<LayerDims>& dims,
                            const std::vector<FreeScale>& layout,
                            const std::vector<double>& values);

// Throws ValidationError when the state's shape or tying does not match the
// prior kind, DomainError on a nonpositive scale.
void check_scales(const std::vector<LayerDims>& dims, const ScaleState& scales,
                  PriorKind kind);

double log_inverse_gamma(double x, double shape, double scale);

// Full log density: normal terms for every weight plus the inverse-gamma
// terms of every free scale, constants included.
double log_prior(const WeightSet& w, const ScaleState& scales,
                 const PriorConfig& cfg);
// d log_prior / dW (scales held fixed): -W / (sigma^2 lambda^2) per entry.
WeightSet grad_log_prior(const WeightSet& w, const ScaleState& scales,
                         const PriorConfig& cfg);

// One conjugate Gibbs sweep over the free scales given the weights, layer by
// layer: the lambdas first, then (GSM) the layer sigma.
ScaleState gibbs_update_scales(const WeightSet& w, const ScaleState& scales,
                               const PriorConfig& cfg, Rng& rng);

double draw_inverse_gamma(double shape, double scale, Rng& rng);

// The standardized weights Z of the non-centered parameterization share the
// WeightSet layout.
using StandardizedWeights = WeightSet;

// W = sigma * lambda * Z elementwise, and its inverse.
WeightSet reparam_to_weights(const StandardizedWeights& z, const ScaleState& scales);
StandardizedWeights weights_to_standardized(const WeightSet& w, const ScaleState& scales);

}  // namespace spqr

#endif  // SPQR_PRIORS_H_
