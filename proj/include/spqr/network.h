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

#ifndef SPQR_NETWORK_H_
#define SPQR_NETWORK_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spqr/basis.h"

namespace spqr {

using Rng = std::mt19937_64;

enum class Activation { kTanh, kRelu };

std::string to_string(Activation activation);
// Accepts "tanh" and "relu"; throws ValidationError otherwise.
Activation parse_activation(const std::string& name);

// Fully connected architecture: p inputs, hidden widths V_1..V_{L-1}, K
// softmax outputs.
struct NetworkShape {
  int inputs = 1;
  std::vector<int> hidden;
  int outputs = 10;
  Activation activation = Activation::kTanh;

  int num_layers() const { return static_cast<int>(hidden.size()) + 1; }
  // Width of layer l in 0..L; layer 0 is the input.
  int width(int l) const;
  void validate() const;

  bool operator==(const NetworkShape&) const = default;
};

// Placement of one layer's matrix inside the flat parameter vector.
struct LayerDims {
  int rows = 0;  // V_l
  int cols = 0;  // V_{l-1} + 1, bias in column 0
  Eigen::Index offset = 0;
};

std::vector<LayerDims> layer_dims(const NetworkShape& shape);

// The network parameter W: one V_l x (V_{l-1}+1) matrix per layer, stored
// contiguously (column-major per layer, layers in order) so samplers and
// optimizers can work on the flat vector directly.
class WeightSet {
 public:
  WeightSet() = default;
  // All-zero weights.
  explicit WeightSet(const NetworkShape& shape);
  WeightSet(const NetworkShape& shape, Eigen::VectorXd flat);

  int num_layers() const { return static_cast<int>(dims_.size()); }
  Eigen::Index size() const { return flat_.size(); }
  const std::vector<LayerDims>& dims() const { return dims_; }

  Eigen::Map<Eigen::MatrixXd> layer(int l);
  Eigen::Map<const Eigen::MatrixXd> layer(int l) const;

  Eigen::VectorXd& flat() { return flat_; }
  const Eigen::VectorXd& flat() const { return flat_; }

  bool all_finite() const { return flat_.allFinite(); }
  bool same_layout(const WeightSet& other) const;

 private:
  std::vector<LayerDims> dims_;
  Eigen::VectorXd flat_;
};

// Zero biases, weights uniform on +-sqrt(6 / (fan_in + fan_out)).
WeightSet init_weights(const NetworkShape& shape, Rng& rng);

// Covariates X (n x p) and responses Y in [0,1].
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;

  Eigen::Index size() const { return y.size(); }
  int num_covariates() const { return static_cast<int>(x.cols()); }
  // Throws ValidationError on empty data, mismatched rows, non-finite values
  // or responses outside [0,1].
  void validate() const;
  Dataset subset(std::span<const Eigen::Index> rows) const;
};

// theta(x, W): the K mixture probabilities for one covariate vector.
Eigen::VectorXd forward(const NetworkShape& shape, const WeightSet& w,
                        const Eigen::VectorXd& x);
// Row-wise theta for a batch of covariate rows (n x K).
Eigen::MatrixXd forward_batch(const NetworkShape& shape, const WeightSet& w,
                              const Eigen::MatrixXd& x);

// Per-layer inverted-dropout masks for the hidden activations of one batch.
// masks[l-1] is n_batch x V_l with entries 0 or 1/(1-rate).
using DropoutMasks = std::vector<Eigen::MatrixXd>;

DropoutMasks make_dropout_masks(const NetworkShape& shape, Eigen::Index rows,
                                double input_rate, double hidden_rate,
                                Rng& rng);

struct LikelihoodValue {
  double value = 0.0;
  // Set when some observation has exactly zero mixture density; value is
  // then -infinity and that observation is excluded from the gradient.
  bool zero_density = false;
  Eigen::Index first_zero = -1;
};

// Sum over observations of log sum_k M_k(y_i) theta_k(x_i, W), with the basis
// values precomputed once. All arithmetic is double precision.
class Likelihood {
 public:
  Likelihood(const NetworkShape& shape, const Dataset& data,
             const SplineBasis& basis);
  Likelihood(const NetworkShape& shape, Eigen::MatrixXd x,
             Eigen::MatrixXd basis_values);

  const NetworkShape& shape() const { return shape_; }
  Eigen::Index size() const { return x_.rows(); }

  LikelihoodValue value(const WeightSet& w) const;
  // Gradient of the summed log-likelihood with respect to every weight.
  LikelihoodValue value_and_gradient(const WeightSet& w, WeightSet& grad) const;

  // Same, restricted to a subset of rows; masks (optional) must be sized for
  // rows.size() observations.
  LikelihoodValue batch(const WeightSet& w, std::span<const Eigen::Index> rows,
                        WeightSet* grad,
                        const DropoutMasks* masks = nullptr) const;

  // Log density of every observation (length n).
  Eigen::VectorXd pointwise(const WeightSet& w) const;

 private:
  LikelihoodValue evaluate(const WeightSet& w, const Eigen::MatrixXd& x,
                           const Eigen::MatrixXd& m, WeightSet* grad,
                           const DropoutMasks* masks,
                           Eigen::VectorXd* pointwise) const;

  NetworkShape shape_;
  Eigen::MatrixXd x_;
  Eigen::MatrixXd m_;
};

// Convenience wrappers that build the basis values on every call.
double log_likelihood(const NetworkShape& shape, const WeightSet& w,
                      const Dataset& data, const SplineBasis& basis);
WeightSet grad_log_likelihood(const NetworkShape& shape, const WeightSet& w,
                              const Dataset& data, const SplineBasis& basis,
                              LikelihoodValue* value = nullptr);

}  // namespace spqr

#endif  // SPQR_NETWORK_H_
