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

#include "spqr/network.h"

#include <cmath>
#include <limits>
#include <sstream>

#include "spqr/errors.h"

namespace spqr {

std::string to_string(Activation activation) {
  return activation == Activation::kTanh ? "tanh" : "relu";
}

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw ValidationError("unknown activation '" + name +
                        "' (expected tanh or relu)");
}

int NetworkShape::width(int l) const {
  if (l == 0) return inputs;
  if (l == num_layers()) return outputs;
  return hidden[l - 1];
}

void NetworkShape::validate() const {
  if (inputs < 1) throw ValidationError("network needs at least one input");
  if (outputs < 1) throw ValidationError("network needs at least one output");
  for (int v : hidden) {
    if (v < 1) throw ValidationError("hidden layer widths must be positive");
  }
}

std::vector<LayerDims> layer_dims(const NetworkShape& shape) {
  std::vector<LayerDims> dims(shape.num_layers());
  Eigen::Index offset = 0;
  for (int l = 1; l <= shape.num_layers(); ++l) {
    LayerDims& d = dims[l - 1];
    d.rows = shape.width(l);
    d.cols = shape.width(l - 1) + 1;
    d.offset = offset;
    offset += static_cast<Eigen::Index>(d.rows) * d.cols;
  }
  return dims;
}

WeightSet::WeightSet(const NetworkShape& shape) : dims_(layer_dims(shape)) {
  const LayerDims& last = dims_.back();
  flat_ = Eigen::VectorXd::Zero(last.offset + last.rows * last.cols);
}

WeightSet::WeightSet(const NetworkShape& shape, Eigen::VectorXd flat)
    : dims_(layer_dims(shape)), flat_(std::move(flat)) {
  const LayerDims& last = dims_.back();
  if (flat_.size() != last.offset + last.rows * last.cols) {
    std::ostringstream msg;
    msg << "weight vector has " << flat_.size() << " entries, shape needs "
        << last.offset + last.rows * last.cols;
    throw ValidationError(msg.str());
  }
}

Eigen::Map<Eigen::MatrixXd> WeightSet::layer(int l) {
  const LayerDims& d = dims_[l];
  return {flat_.data() + d.offset, d.rows, d.cols};
}

Eigen::Map<const Eigen::MatrixXd> WeightSet::layer(int l) const {
  const LayerDims& d = dims_[l];
  return {flat_.data() + d.offset, d.rows, d.cols};
}

bool WeightSet::same_layout(const WeightSet& other) const {
  if (dims_.size() != other.dims_.size()) return false;
  for (size_t l = 0; l < dims_.size(); ++l) {
    if (dims_[l].rows != other.dims_[l].rows ||
        dims_[l].cols != other.dims_[l].cols) {
      return false;
    }
  }
  return true;
}

WeightSet init_weights(const NetworkShape& shape, Rng& rng) {
  shape.validate();
  WeightSet w(shape);
  for (int l = 0; l < w.num_layers(); ++l) {
    auto m = w.layer(l);
    const double bound = std::sqrt(6.0 / (m.cols() - 1 + m.rows()));
    std::uniform_real_distribution<double> unif(-bound, bound);
    for (Eigen::Index j = 1; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = unif(rng);
    }
  }
  return w;
}

void Dataset::validate() const {
  if (y.size() == 0) throw ValidationError("dataset is empty");
  if (x.rows() != y.size()) {
    throw ValidationError("covariate rows do not match response length");
  }
  if (x.cols() < 1) throw ValidationError("dataset has no covariates");
  if (!x.allFinite()) throw ValidationError("covariates contain non-finite values");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!(y[i] >= 0.0 && y[i] <= 1.0)) {
      std::ostringstream msg;
      msg << "response " << y[i] << " at row " << i + 1
          << " is outside [0,1]";
      throw ValidationError(msg.str());
    }
  }
}

Dataset Dataset::subset(std::span<const Eigen::Index> rows) const {
  Dataset out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    out.x.row(r) = x.row(rows[r]);
    out.y[r] = y[rows[r]];
  }
  return out;
}

namespace {

void check_shape(const NetworkShape& shape, const WeightSet& w,
                 Eigen::Index cols) {
  if (cols != shape.inputs) {
    std::ostringstream msg;
    msg << "expected " << shape.inputs << " covariates, got " << cols;
    throw ValidationError(msg.str());
  }
  if (w.num_layers() != shape.num_layers()) {
    throw ValidationError("weight set does not match network depth");
  }
  const auto dims = layer_dims(shape);
  for (int l = 0; l < w.num_layers(); ++l) {
    if (dims[l].rows != w.dims()[l].rows || dims[l].cols != w.dims()[l].cols) {
      throw ValidationError("weight set does not match network shape");
    }
  }
}

// Affine map of a batch through one layer: rows of `in` times W[:,1:]^T plus
// the bias column.
Eigen::MatrixXd affine(const Eigen::MatrixXd& in,
                       const Eigen::Map<const Eigen::MatrixXd>& w) {
  Eigen::MatrixXd z = in * w.rightCols(w.cols() - 1).transpose();
  z.rowwise() += w.col(0).transpose();
  return z;
}

void activate(Activation act, Eigen::MatrixXd& z) {
  if (act == Activation::kTanh) {
    z = z.array().tanh();
  } else {
    z = z.cwiseMax(0.0);
  }
}

void softmax_rows(Eigen::MatrixXd& z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    z.row(i) = (z.row(i).array() - mx).exp();
    z.row(i) /= z.row(i).sum();
  }
}

}  // namespace

Eigen::MatrixXd forward_batch(const NetworkShape& shape, const WeightSet& w,
                              const Eigen::MatrixXd& x) {
  check_shape(shape, w, x.cols());
  Eigen::MatrixXd a = x;
  for (int l = 0; l < shape.num_layers(); ++l) {
    Eigen::MatrixXd z = affine(a, w.layer(l));
    if (l + 1 < shape.num_layers()) activate(shape.activation, z);
    a = std::move(z);
  }
  softmax_rows(a);
  return a;
}

Eigen::VectorXd forward(const NetworkShape& shape, const WeightSet& w,
                        const Eigen::VectorXd& x) {
  Eigen::MatrixXd row = x.transpose();
  return forward_batch(shape, w, row).row(0).transpose();
}

DropoutMasks make_dropout_masks(const NetworkShape& shape, Eigen::Index rows,
                                double input_rate, double hidden_rate,
                                Rng& rng) {
  DropoutMasks masks;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int l = 1; l < shape.num_layers(); ++l) {
    const double rate = l == 1 ? input_rate : hidden_rate;
    Eigen::MatrixXd mask(rows, shape.width(l));
    if (rate <= 0.0) {
      mask.setOnes();
    } else {
      const double keep = 1.0 / (1.0 - rate);
      for (Eigen::Index j = 0; j < mask.cols(); ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
          mask(i, j) = unif(rng) < rate ? 0.0 : keep;
        }
      }
    }
    masks.push_back(std::move(mask));
  }
  return masks;
}

Likelihood::Likelihood(const NetworkShape& shape, const Dataset& data,
                       const SplineBasis& basis)
    : shape_(shape), x_(data.x), m_(basis_matrix(basis, data.y)) {
  shape_.validate();
  if (basis.size() != shape_.outputs) {
    throw ValidationError("network output width does not match basis size");
  }
}

Likelihood::Likelihood(const NetworkShape& shape, Eigen::MatrixXd x,
                       Eigen::MatrixXd basis_values)
    : shape_(shape), x_(std::move(x)), m_(std::move(basis_values)) {
  shape_.validate();
  if (m_.cols() != shape_.outputs || m_.rows() != x_.rows()) {
    throw ValidationError("basis values do not match data or network");
  }
}

LikelihoodValue Likelihood::evaluate(const WeightSet& w,
                                     const Eigen::MatrixXd& x,
                                     const Eigen::MatrixXd& m, WeightSet* grad,
                                     const DropoutMasks* masks,
                                     Eigen::VectorXd* pointwise) const {
  check_shape(shape_, w, x.cols());
  const int num_layers = shape_.num_layers();
  const Eigen::Index n = x.rows();

  // inputs[l] feeds layer l; activations[l] is the pre-dropout hidden output
  // of layer l+1, kept for the activation derivative.
  std::vector<Eigen::MatrixXd> inputs(num_layers);
  std::vector<Eigen::MatrixXd> activations(num_layers - 1);
  inputs[0] = x;
  for (int l = 0; l + 1 < num_layers; ++l) {
    Eigen::MatrixXd z = affine(inputs[l], w.layer(l));
    activate(shape_.activation, z);
    activations[l] = z;
    if (masks != nullptr) z.array() *= (*masks)[l].array();
    inputs[l + 1] = std::move(z);
  }
  Eigen::MatrixXd theta = affine(inputs[num_layers - 1], w.layer(num_layers - 1));
  softmax_rows(theta);

  LikelihoodValue out;
  Eigen::VectorXd density = theta.cwiseProduct(m).rowwise().sum();
  if (pointwise != nullptr) pointwise->resize(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double logf = std::log(density[i]);
    if (pointwise != nullptr) (*pointwise)[i] = logf;
    if (!(density[i] > 0.0) && !out.zero_density) {
      out.zero_density = true;
      out.first_zero = i;
    }
    total += logf;
  }
  out.value = out.zero_density ? -std::numeric_limits<double>::infinity()
                               : total;
  if (grad == nullptr) return out;

  if (!grad->same_layout(w)) *grad = WeightSet(shape_);
  // d log f_i / d z_ik = theta_ik (M_ik / f_i - 1)
  Eigen::MatrixXd delta(n, theta.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (density[i] > 0.0) {
      delta.row(i) = theta.row(i).cwiseProduct(m.row(i)) / density[i] -
                     theta.row(i);
    } else {
      delta.row(i).setZero();
    }
  }
  for (int l = num_layers - 1; l >= 0; --l) {
    auto g = grad->layer(l);
    g.col(0) = delta.colwise().sum().transpose();
    g.rightCols(g.cols() - 1) = delta.transpose() * inputs[l];
    if (l == 0) break;
    const auto wl = w.layer(l);
    Eigen::MatrixXd back = delta * wl.rightCols(wl.cols() - 1);
    if (masks != nullptr) back.array() *= (*masks)[l - 1].array();
    const Eigen::MatrixXd& u = activations[l - 1];
    if (shape_.activation == Activation::kTanh) {
      back.array() *= 1.0 - u.array().square();
    } else {
      back.array() *= (u.array() > 0.0).cast<double>();
    }
    delta = std::move(back);
  }
  return out;
}

LikelihoodValue Likelihood::value(const WeightSet& w) const {
  return evaluate(w, x_, m_, nullptr, nullptr, nullptr);
}

LikelihoodValue Likelihood::value_and_gradient(const WeightSet& w,
                                               WeightSet& grad) const {
  return evaluate(w, x_, m_, &grad, nullptr, nullptr);
}

LikelihoodValue Likelihood::batch(const WeightSet& w,
                                  std::span<const Eigen::Index> rows,
                                  WeightSet* grad,
                                  const DropoutMasks* masks) const {
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd xb(n, x_.cols());
  Eigen::MatrixXd mb(n, m_.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    xb.row(r) = x_.row(rows[r]);
    mb.row(r) = m_.row(rows[r]);
  }
  return evaluate(w, xb, mb, grad, masks, nullptr);
}

Eigen::VectorXd Likelihood::pointwise(const WeightSet& w) const {
  Eigen::VectorXd out;
  evaluate(w, x_, m_, nullptr, nullptr, &out);
  return out;
}

double log_likelihood(const NetworkShape& shape, const WeightSet& w,
                      const Dataset& data, const SplineBasis& basis) {
  return Likelihood(shape, data, basis).value(w).value;
}

WeightSet grad_log_likelihood(const NetworkShape& shape, const WeightSet& w,
                              const Dataset& data, const SplineBasis& basis,
                              LikelihoodValue* value) {
  WeightSet grad(shape);
  const LikelihoodValue v =
      Likelihood(shape, data, basis).value_and_gradient(w, grad);
  if (value != nullptr) *value = v;
  return grad;
}

}  // namespace spqr
