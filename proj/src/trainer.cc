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

#include "spqr/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "spqr/errors.h"
#include "spqr/model_file.h"

namespace spqr {

void TrainControl::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw ValidationError("learning rate must be a nonnegative number");
  }
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (epochs < 1) throw ValidationError("epochs must be at least 1");
  if (!(valid_pct >= 0.0 && valid_pct < 1.0)) {
    throw ValidationError("valid_pct must lie in [0,1)");
  }
  if (early_stopping_epochs < 1) {
    throw ValidationError("early_stopping_epochs must be at least 1");
  }
  for (double rate : {dropout_input, dropout_hidden}) {
    if (!(rate >= 0.0 && rate < 1.0)) {
      throw ValidationError("dropout probabilities must lie in [0,1)");
    }
  }
  if (batchnorm) {
    throw CapabilityError("batch normalization is not supported");
  }
}

void adam_step(AdamState& state, Eigen::VectorXd& params,
               const Eigen::VectorXd& grads, double lr) {
  if (state.m.size() != params.size()) {
    state = AdamState(params.size());
  }
  if (grads.size() != params.size()) {
    throw ValidationError("gradient length does not match parameters");
  }
  ++state.t;
  state.m = AdamState::kBeta1 * state.m + (1.0 - AdamState::kBeta1) * grads;
  state.v = AdamState::kBeta2 * state.v +
            (1.0 - AdamState::kBeta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(AdamState::kBeta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(AdamState::kBeta2, static_cast<double>(state.t));
  params.array() -= lr * (state.m.array() / c1) /
                    ((state.v.array() / c2).sqrt() + AdamState::kEpsilon);
}

FoldAssignment create_folds(Eigen::Index n, int nfold, std::uint64_t seed) {
  if (nfold < 2 || nfold > n) {
    std::ostringstream msg;
    msg << "nfold must lie in [2, " << n << "], got " << nfold;
    throw ValidationError(msg.str());
  }
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  FoldAssignment folds(nfold);
  for (Eigen::Index i = 0; i < n; ++i) folds[i % nfold].push_back(order[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

void check_folds(const FoldAssignment& folds, Eigen::Index n) {
  if (folds.size() < 2) throw ValidationError("need at least two folds");
  std::vector<int> seen(n, 0);
  for (size_t f = 0; f < folds.size(); ++f) {
    if (folds[f].empty()) {
      throw ValidationError("fold " + std::to_string(f + 1) + " is empty");
    }
    for (Eigen::Index i : folds[f]) {
      if (i < 0 || i >= n) {
        throw ValidationError("fold " + std::to_string(f + 1) +
                              " holds an index outside the data");
      }
      if (seen[i]++) {
        throw ValidationError("observation " + std::to_string(i + 1) +
                              " appears in more than one fold");
      }
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!seen[i]) {
      throw ValidationError("observation " + std::to_string(i + 1) +
                            " is in no fold");
    }
  }
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed) {
  if (seed.has_value()) return *seed;
  std::random_device device;
  return (static_cast<std::uint64_t>(device()) << 32) ^ device();
}

namespace {

// What the epoch loop needs from MLE or MAP.
struct Problem {
  std::function<double(const Eigen::VectorXd&, std::span<const Eigen::Index>,
                       Eigen::VectorXd*, const DropoutMasks*, LikelihoodValue*)>
      batch_loss;
  std::function<WeightSet(const Eigen::VectorXd&)> to_weights;
};

void throw_nonfinite(int epoch, size_t batch, const LikelihoodValue& value) {
  std::ostringstream msg;
  msg << "non-finite loss at epoch " << epoch + 1 << ", batch " << batch + 1;
  if (value.zero_density) {
    msg << " (zero density at batch row " << value.first_zero + 1 << ")";
  }
  throw NumericalError(msg.str());
}

double mean_nll_rows(const Likelihood& lik, const WeightSet& w,
                     std::span<const Eigen::Index> rows) {
  const LikelihoodValue v = lik.batch(w, rows, nullptr);
  return -v.value / static_cast<double>(rows.size());
}

FittedModel train(const Dataset& data, const NetworkShape& shape,
                  const SplineBasis& basis, const TrainControl& control,
                  const Normalization& normalization, Method method,
                  const std::optional<PriorConfig>& prior,
                  const std::function<Problem(const Likelihood&, Eigen::Index,
                                              Eigen::VectorXd&, Rng&)>& setup) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  control.validate();
  data.validate();
  shape.validate();
  if (shape.outputs != basis.size()) {
    throw ValidationError("network output width must equal the basis size");
  }
  if (data.num_covariates() != shape.inputs) {
    throw ValidationError("data has " + std::to_string(data.num_covariates()) +
                          " covariates but the network expects " +
                          std::to_string(shape.inputs));
  }

  const std::uint64_t seed = resolve_seed(control.seed);
  Rng rng(seed);
  const Eigen::Index n = data.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_valid = static_cast<Eigen::Index>(std::floor(control.valid_pct * n));
  std::vector<Eigen::Index> valid(order.begin(), order.begin() + n_valid);
  std::vector<Eigen::Index> train_rows(order.begin() + n_valid, order.end());
  if (train_rows.empty()) throw ValidationError("training split is empty");
  std::sort(valid.begin(), valid.end());
  std::sort(train_rows.begin(), train_rows.end());

  const Likelihood lik(shape, data, basis);
  Eigen::VectorXd params;
  const Problem problem =
      setup(lik, static_cast<Eigen::Index>(train_rows.size()), params, rng);

  FittedModel model;
  model.shape = shape;
  model.basis = basis;
  model.method = method;
  model.normalization = normalization;
  model.prior = prior;
  model.seed = seed;
  model.log.learning_rate = control.lr;
  model.log.batch_size = control.batch_size;

  const bool dropout = control.dropout_input > 0.0 || control.dropout_hidden > 0.0;
  AdamState adam(params.size());
  Eigen::VectorXd grad(params.size());
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_params = params;
  int stall = 0;
  std::vector<Eigen::Index> epoch_order = train_rows;
  const size_t batch = static_cast<size_t>(control.batch_size);

  for (int epoch = 0; epoch < control.epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    std::shuffle(epoch_order.begin(), epoch_order.end(), rng);
    for (size_t b = 0, first = 0; first < epoch_order.size(); ++b, first += batch) {
      const size_t count = std::min(batch, epoch_order.size() - first);
      std::span<const Eigen::Index> rows(epoch_order.data() + first, count);
      DropoutMasks masks;
      if (dropout) {
        masks = make_dropout_masks(shape, static_cast<Eigen::Index>(count),
                                   control.dropout_input,
                                   control.dropout_hidden, rng);
      }
      LikelihoodValue value;
      const double loss = problem.batch_loss(params, rows, &grad,
                                             dropout ? &masks : nullptr, &value);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        throw_nonfinite(epoch, b, value);
      }
      adam_step(adam, params, grad, control.lr);
    }

    const WeightSet w = problem.to_weights(params);
    if (!w.all_finite()) throw_nonfinite(epoch, (epoch_order.size() - 1) / batch, {});
    const double train_loss = mean_nll_rows(lik, w, train_rows);
    const double valid_loss =
        valid.empty() ? train_loss : mean_nll_rows(lik, w, valid);
    if (!std::isfinite(train_loss)) {
      std::ostringstream msg;
      msg << "non-finite training loss after epoch " << epoch + 1;
      throw NumericalError(msg.str());
    }
    model.log.train_loss.push_back(train_loss);
    model.log.valid_loss.push_back(valid_loss);
    model.log.epoch_seconds.push_back(
        std::chrono::duration<double>(Clock::now() - epoch_start).count());

    if (valid_loss < best) {
      best = valid_loss;
      best_params = params;
      model.log.best_epoch = epoch;
      stall = 0;
      if (!control.checkpoint_path.empty()) {
        model.weights = {w};
        save_model(model, control.checkpoint_path);
      }
    } else {
      ++stall;
    }
    if (control.progress != nullptr && control.print_every > 0 &&
        (epoch + 1) % control.print_every == 0) {
      *control.progress << "epoch " << epoch + 1 << ": train " << std::fixed
                        << std::setprecision(4) << train_loss << ", validation "
                        << valid_loss << '\n';
      control.progress->unsetf(std::ios::floatfield);
    }
    if (stall >= control.early_stopping_epochs) break;
  }

  model.weights = {problem.to_weights(best_params)};
  model.log.elapsed_seconds =
      std::chrono::duration<double>(Clock::now() - start).count();
  return model;
}

}  // namespace

FittedModel fit_mle(const Dataset& data, const NetworkShape& shape,
                    const SplineBasis& basis, const TrainControl& control,
                    const Normalization& normalization) {
  auto setup = [&shape](const Likelihood& lik, Eigen::Index,
                        Eigen::VectorXd& params, Rng& rng) {
    params = init_weights(shape, rng).flat();
    Problem p;
    p.to_weights = [&shape](const Eigen::VectorXd& v) { return WeightSet(shape, v); };
    p.batch_loss = [&lik, &shape](const Eigen::VectorXd& v,
                                  std::span<const Eigen::Index> rows,
                                  Eigen::VectorXd* grad,
                                  const DropoutMasks* masks,
                                  LikelihoodValue* value) {
      const WeightSet w(shape, v);
      WeightSet g(shape);
      const LikelihoodValue lv = lik.batch(w, rows, &g, masks);
      if (value != nullptr) *value = lv;
      const double scale = 1.0 / static_cast<double>(rows.size());
      *grad = -scale * g.flat();
      return -scale * lv.value;
    };
    return p;
  };
  return train(data, shape, basis, control, normalization, Method::kMLE,
               std::nullopt, setup);
}

MapObjective::MapObjective(const Likelihood& likelihood,
                           const PriorConfig& prior, Eigen::Index num_train)
    : likelihood_(&likelihood),
      prior_(prior),
      num_train_(num_train),
      shape_(likelihood.shape()),
      dims_(layer_dims(shape_)),
      layout_(free_scales(dims_, prior.kind)),
      num_weights_(WeightSet(shape_).size()) {
  prior_.validate();
  if (num_train_ < 1) throw ValidationError("training split is empty");
}

Eigen::VectorXd MapObjective::initial_params(const WeightSet& w) const {
  Eigen::VectorXd params = Eigen::VectorXd::Zero(size());
  const ScaleState s = initial_scales(dims_, prior_.kind);
  params.head(num_weights_) = weights_to_standardized(w, s).flat();
  return params;
}

ScaleState MapObjective::scales(const Eigen::VectorXd& params) const {
  std::vector<double> values(layout_.size());
  for (size_t i = 0; i < layout_.size(); ++i) {
    values[i] = std::exp(params[num_weights_ + static_cast<Eigen::Index>(i)]);
  }
  return scales_from_free(dims_, layout_, values);
}

WeightSet MapObjective::weights(const Eigen::VectorXd& params) const {
  const StandardizedWeights z(shape_, params.head(num_weights_));
  return reparam_to_weights(z, scales(params));
}

double MapObjective::loss(const Eigen::VectorXd& params,
                          std::span<const Eigen::Index> rows,
                          Eigen::VectorXd* grad, const DropoutMasks* masks,
                          LikelihoodValue* value) const {
  if (params.size() != size()) {
    throw ValidationError("MAP parameter vector has the wrong length");
  }
  const ScaleState s = scales(params);
  const StandardizedWeights z(shape_, params.head(num_weights_));
  const WeightSet w = reparam_to_weights(z, s);
  WeightSet g(shape_);
  const LikelihoodValue lv =
      likelihood_->batch(w, rows, grad != nullptr ? &g : nullptr, masks);
  if (value != nullptr) *value = lv;
  const double batch_scale = 1.0 / static_cast<double>(rows.size());
  const double prior_scale = 1.0 / static_cast<double>(num_train_);
  const double log_2pi = std::log(2.0 * std::numbers::pi);

  const Eigen::VectorXd& zf = z.flat();
  double log_p = -0.5 * (zf.squaredNorm() + zf.size() * log_2pi);
  for (size_t i = 0; i < layout_.size(); ++i) {
    const double u = params[num_weights_ + static_cast<Eigen::Index>(i)];
    const bool sigma = layout_[i].kind == FreeScale::Kind::kSigma;
    const double a = sigma ? prior_.a_sigma : prior_.a_lambda;
    const double b = sigma ? prior_.b_sigma : prior_.b_lambda;
    log_p += log_inverse_gamma(std::exp(u), a, b);
  }
  const double loss = -batch_scale * lv.value - prior_scale * log_p;
  if (grad == nullptr) return loss;

  // dLoss/dW of the likelihood part.
  WeightSet gw(shape_, -batch_scale * g.flat());
  grad->resize(size());
  WeightSet gz(shape_);
  for (int l = 0; l < w.num_layers(); ++l) {
    const auto wl = w.layer(l);
    const auto zl = z.layer(l);
    auto out = gz.layer(l);
    for (Eigen::Index j = 0; j < wl.cols(); ++j) {
      const double sd = std::sqrt(s.sigma2[l] * s.lambda2[l][j]);
      out.col(j) = sd * gw.layer(l).col(j) + prior_scale * zl.col(j);
    }
  }
  grad->head(num_weights_) = gz.flat();
  for (size_t i = 0; i < layout_.size(); ++i) {
    const FreeScale& f = layout_[i];
    const auto wl = w.layer(f.layer);
    const auto gl = gw.layer(f.layer);
    double chain = 0.0;
    if (f.kind == FreeScale::Kind::kSigma) {
      chain = 0.5 * wl.cwiseProduct(gl).sum();
    } else {
      for (int j : f.columns) chain += 0.5 * wl.col(j).dot(gl.col(j));
    }
    const Eigen::Index k = num_weights_ + static_cast<Eigen::Index>(i);
    const double x = std::exp(params[k]);
    const bool sigma = f.kind == FreeScale::Kind::kSigma;
    const double a = sigma ? prior_.a_sigma : prior_.a_lambda;
    const double b = sigma ? prior_.b_sigma : prior_.b_lambda;
    (*grad)[k] = chain + prior_scale * ((a + 1.0) - b / x);
  }
  return loss;
}

FittedModel fit_map(const Dataset& data, const NetworkShape& shape,
                    const SplineBasis& basis, const PriorConfig& prior,
                    const TrainControl& control,
                    const Normalization& normalization) {
  prior.validate();
  std::optional<MapObjective> objective;
  auto setup = [&](const Likelihood& lik, Eigen::Index num_train,
                   Eigen::VectorXd& params, Rng& rng) {
    objective.emplace(lik, prior, num_train);
    params = objective->initial_params(init_weights(shape, rng));
    Problem p;
    p.to_weights = [&objective](const Eigen::VectorXd& v) {
      return objective->weights(v);
    };
    p.batch_loss = [&objective](const Eigen::VectorXd& v,
                                std::span<const Eigen::Index> rows,
                                Eigen::VectorXd* grad, const DropoutMasks* masks,
                                LikelihoodValue* value) {
      return objective->loss(v, rows, grad, masks, value);
    };
    return p;
  };
  return train(data, shape, basis, control, normalization, Method::kMAP, prior,
               setup);
}

double mean_nll(const FittedModel& model, const Dataset& data) {
  const Likelihood lik(model.shape, data, model.basis);
  if (model.num_samples() == 1) {
    return -lik.value(model.weights.front()).value / data.size();
  }
  Eigen::VectorXd density = Eigen::VectorXd::Zero(data.size());
  for (const WeightSet& w : model.weights) {
    density.array() += lik.pointwise(w).array().exp();
  }
  density /= model.num_samples();
  return -density.array().log().mean();
}

CvResult cv_error(const Dataset& data, const FoldAssignment& folds,
                  const Fitter& fitter) {
  data.validate();
  check_folds(folds, data.size());
  CvResult result;
  std::vector<Eigen::Index> complement;
  for (size_t f = 0; f < folds.size(); ++f) {
    std::vector<char> held(data.size(), 0);
    for (Eigen::Index i : folds[f]) held[i] = 1;
    complement.clear();
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      if (!held[i]) complement.push_back(i);
    }
    const std::string where = "fold " + std::to_string(f + 1) + ": ";
    try {
      const FittedModel model = fitter(data.subset(complement), static_cast<int>(f));
      result.fold_error.push_back(mean_nll(model, data.subset(folds[f])));
    } catch (const DomainError& e) {
      throw DomainError(where + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    } catch (const CapabilityError& e) {
      throw CapabilityError(where + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError(where + e.what());
    }
  }
  result.mean = std::accumulate(result.fold_error.begin(),
                                result.fold_error.end(), 0.0) /
                static_cast<double>(result.fold_error.size());
  return result;
}

CvResult cv_error(const Dataset& data, const NetworkShape& shape,
                  const SplineBasis& basis, Method method,
                  const std::optional<PriorConfig>& prior,
                  const TrainControl& control, const FoldAssignment& folds) {
  if (method == Method::kMCMC) {
    throw CapabilityError("cross-validation is only applicable to MLE and MAP");
  }
  if (method == Method::kMAP && !prior.has_value()) {
    throw ValidationError("MAP cross-validation needs a prior");
  }
  const std::uint64_t base = resolve_seed(control.seed);
  auto fitter = [&](const Dataset& train, int fold) {
    TrainControl c = control;
    c.seed = base + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(fold + 1);
    c.checkpoint_path.clear();
    if (method == Method::kMLE) return fit_mle(train, shape, basis, c);
    return fit_map(train, shape, basis, *prior, c);
  };
  return cv_error(data, folds, fitter);
}

}  // namespace spqr
