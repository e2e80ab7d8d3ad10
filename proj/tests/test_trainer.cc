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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "oracles.h"
#include "spqr/errors.h"
#include "spqr/model_file.h"
#include "spqr/simulate.h"
#include "spqr/trainer.h"

namespace spqr {
namespace {

const NetworkShape kShape{3, {10}, 10, Activation::kTanh};

TrainControl quick(int epochs = 30) {
  TrainControl c;
  c.epochs = epochs;
  c.batch_size = 64;
  c.lr = 0.01;
  c.seed = 42;
  c.early_stopping_epochs = epochs;
  return c;
}

double uniform_theta_nll(const Dataset& d, const SplineBasis& b) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) total -= std::log(b.eval_m(d.y[i]).mean());
  return total / d.size();
}

TEST(Adam, FirstStep) {
  AdamState s(1);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(1);
  adam_step(s, p, Eigen::VectorXd::Ones(1), 0.01);
  EXPECT_NEAR(p[0], -0.01 / (1 + 1e-8), 1e-17);
  EXPECT_EQ(s.t, 1);
}

TEST(Adam, ZeroGradientLeavesParams) {
  AdamState s(3);
  Eigen::VectorXd p(3);
  p << 1, -2, 3;
  const Eigen::VectorXd before = p;
  adam_step(s, p, Eigen::VectorXd::Zero(3), 0.1);
  EXPECT_EQ(p, before);
}

TEST(Adam, TwoStepMoments) {
  AdamState s(1);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(1);
  const double g = 0.7;
  adam_step(s, p, Eigen::VectorXd::Constant(1, g), 0.01);
  adam_step(s, p, Eigen::VectorXd::Constant(1, g), 0.01);
  const double m1 = 0.1 * g, v1 = 0.001 * g * g;
  const double m2 = 0.9 * m1 + 0.1 * g, v2 = 0.999 * v1 + 0.001 * g * g;
  EXPECT_NEAR(s.m[0], m2, 1e-14);
  EXPECT_NEAR(s.v[0], v2, 1e-14);
}

TEST(Folds, BalancedPartition) {
  const FoldAssignment f = create_folds(10, 5, 1);
  ASSERT_EQ(f.size(), 5u);
  std::vector<int> seen(10, 0);
  for (const auto& fold : f) {
    EXPECT_EQ(fold.size(), 2u);
    for (Eigen::Index i : fold) ++seen[i];
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_EQ(create_folds(10, 5, 1), f);
  std::vector<size_t> sizes;
  for (const auto& fold : create_folds(7, 3, 2)) sizes.push_back(fold.size());
  std::sort(sizes.begin(), sizes.end());
  EXPECT_EQ(sizes, (std::vector<size_t>{2, 2, 3}));
  EXPECT_THROW(create_folds(3, 5, 1), ValidationError);
}

TEST(FitMle, BeatsUniformAndIsDeterministic) {
  const Dataset d = simulate_beta(600, 1);
  const SplineBasis b(10);
  const FittedModel m = fit_mle(d, kShape, b, quick());
  EXPECT_LT(m.log.valid_loss[m.log.best_epoch], uniform_theta_nll(d, b));
  const FittedModel again = fit_mle(d, kShape, b, quick());
  EXPECT_EQ(serialize_model(again), serialize_model(m));
}

TEST(FitMle, EarlyStopWithZeroRate) {
  const Dataset d = simulate_beta(200, 2);
  TrainControl c = quick(50);
  c.lr = 0.0;
  c.early_stopping_epochs = 1;
  const FittedModel m = fit_mle(d, kShape, SplineBasis(10), c);
  EXPECT_EQ(m.log.train_loss.size(), 2u);
  EXPECT_EQ(m.log.best_epoch, 0);
}

TEST(FitMle, ReturnsBestEpochAndCheckpoint) {
  const Dataset d = simulate_beta(300, 3);
  TrainControl c = quick(40);
  c.lr = 0.05;
  const auto path = std::filesystem::temp_directory_path() / "spqr_ckpt.bin";
  c.checkpoint_path = path.string();
  const FittedModel m = fit_mle(d, kShape, SplineBasis(10), c);
  const FittedModel ckpt = load_model(path.string());
  std::filesystem::remove(path);
  EXPECT_EQ(ckpt.weights[0].flat(), m.weights[0].flat());
  // recompute the validation loss of the returned weights on the same split
  Rng rng(42);
  std::vector<Eigen::Index> order(300);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Eigen::Index> valid(order.begin(), order.begin() + 60);
  std::sort(valid.begin(), valid.end());
  const Likelihood lik(kShape, d, SplineBasis(10));
  const double v = -lik.batch(m.weights[0], valid, nullptr).value / 60.0;
  EXPECT_EQ(v, m.log.valid_loss[m.log.best_epoch]);
  const double best = *std::min_element(m.log.valid_loss.begin(), m.log.valid_loss.end());
  EXPECT_EQ(best, m.log.valid_loss[m.log.best_epoch]);
}

TEST(FitMle, ZeroDropoutIsBitExactNoOp) {
  const Dataset d = simulate_beta(200, 4);
  TrainControl c = quick(5);
  const FittedModel a = fit_mle(d, kShape, SplineBasis(10), c);
  c.dropout_input = 0.0;
  c.dropout_hidden = 0.0;
  const FittedModel b = fit_mle(d, kShape, SplineBasis(10), c);
  EXPECT_EQ(serialize_model(a), serialize_model(b));
  c.dropout_input = 0.2;
  EXPECT_NO_THROW(fit_mle(d, kShape, SplineBasis(10), c));
}

TEST(FitMle, LossDropsOverFirstEpoch) {
  const Dataset d = simulate_beta(500, 5);
  const SplineBasis b(10);
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TrainControl c = quick(1);
    c.seed = seed;
    const FittedModel m = fit_mle(d, kShape, b, c);
    // the Glorot start is close to uniform theta
    if (m.log.train_loss[0] < uniform_theta_nll(d, b)) ++improved;
  }
  EXPECT_GE(improved, 9);
}

TEST(FitMle, RejectsBadControl) {
  const Dataset d = simulate_beta(50, 6);
  TrainControl c = quick(1);
  c.batchnorm = true;
  EXPECT_THROW(fit_mle(d, kShape, SplineBasis(10), c), CapabilityError);
  c = quick(1);
  c.valid_pct = 1.0;
  EXPECT_THROW(fit_mle(d, kShape, SplineBasis(10), c), ValidationError);
  EXPECT_THROW(fit_mle(d, kShape, SplineBasis(8), quick(1)), ValidationError);
}

TEST(MapObjective, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  for (PriorKind kind : {PriorKind::kGP, PriorKind::kARD, PriorKind::kGSM}) {
    const NetworkShape s{2, {3, 4}, 6, Activation::kTanh};
    const Dataset d = testing::random_data(2, 15, rng);
    const Likelihood lik(s, d, SplineBasis(6));
    const MapObjective obj(lik, PriorConfig{kind, 1.3, 0.8, 2.0, 0.5}, 15);
    Eigen::VectorXd params(obj.size());
    std::normal_distribution<double> n(0.0, 0.5);
    for (Eigen::Index i = 0; i < params.size(); ++i) params[i] = n(rng);
    std::vector<Eigen::Index> rows{0, 3, 5, 8, 13};
    Eigen::VectorXd grad;
    obj.loss(params, rows, &grad);
    const auto f = [&](const Eigen::VectorXd& v) { return obj.loss(v, rows, nullptr); };
    EXPECT_LT(testing::gradient_error(f, params, grad), 1e-6);
  }
}

TEST(MapObjective, ZeroStartIsUniform) {
  const Dataset d = simulate_beta(100, 8);
  const SplineBasis b(10);
  const Likelihood lik(kShape, d, b);
  const MapObjective obj(lik, PriorConfig{PriorKind::kARD}, 100);
  const Eigen::VectorXd params = obj.initial_params(WeightSet(kShape));
  const WeightSet w = obj.weights(params);
  EXPECT_EQ(w.flat().cwiseAbs().sum(), 0.0);
  EXPECT_NEAR(-lik.value(w).value / 100, uniform_theta_nll(d, b), 1e-12);
}

TEST(FitMap, DefaultsRunToCompletion) {
  const Dataset d = simulate_beta(400, 9);
  const FittedModel map = fit_map(d, kShape, SplineBasis(10), PriorConfig{PriorKind::kARD}, quick());
  EXPECT_TRUE(std::isfinite(map.log.train_loss.back()));
  ASSERT_TRUE(map.prior.has_value());
  EXPECT_EQ(map.prior->kind, PriorKind::kARD);
}

TEST(FitMap, VaguePriorApproachesMle) {
  // Small full-batch problem trained close to convergence.
  const Dataset d = simulate_beta(400, 9);
  const NetworkShape s{3, {3}, 10, Activation::kTanh};
  const SplineBasis b(10);
  TrainControl c = quick(1500);
  c.batch_size = 400;
  c.valid_pct = 0.0;
  c.lr = 0.02;
  const double lm = fit_mle(d, s, b, c).log.train_loss.back();
  const double lv =
      fit_map(d, s, b, PriorConfig{PriorKind::kGP, 1e-3, 1e6}, c).log.train_loss.back();
  EXPECT_LT(std::abs(lv - lm) / std::abs(lm), 0.01) << lm << " " << lv;
}

TEST(CrossValidation, ScoresEveryObservationOnce) {
  const Dataset d = simulate_beta(100, 10);
  const SplineBasis b(10);
  const FoldAssignment folds = create_folds(100, 4, 3);
  FittedModel uniform;
  uniform.shape = kShape;
  uniform.weights = {WeightSet(kShape)};
  const CvResult r = cv_error(d, folds, [&](const Dataset&, int) { return uniform; });
  ASSERT_EQ(r.fold_error.size(), 4u);
  double weighted = 0.0;
  for (size_t f = 0; f < 4; ++f) weighted += r.fold_error[f] * folds[f].size();
  EXPECT_NEAR(weighted / 100, uniform_theta_nll(d, b), 1e-12);
}

TEST(CrossValidation, DivergentRateScoresWorse) {
  const Dataset d = simulate_beta(300, 11);
  const SplineBasis b(10);
  const FoldAssignment folds = create_folds(300, 3, 5);
  TrainControl c = quick(20);
  const double good = cv_error(d, kShape, b, Method::kMLE, std::nullopt, c, folds).mean;
  c.lr = 5.0;
  double bad = std::numeric_limits<double>::infinity();
  try {
    bad = cv_error(d, kShape, b, Method::kMLE, std::nullopt, c, folds).mean;
  } catch (const NumericalError&) {
  }
  EXPECT_GT(bad, good);
  EXPECT_EQ(cv_error(d, kShape, b, Method::kMLE, std::nullopt, quick(5), folds).mean,
            cv_error(d, kShape, b, Method::kMLE, std::nullopt, quick(5), folds).mean);
}

TEST(CrossValidation, RejectsMcmc) {
  const Dataset d = simulate_beta(50, 12);
  EXPECT_THROW(cv_error(d, kShape, SplineBasis(10), Method::kMCMC, PriorConfig{}, quick(1),
                        create_folds(50, 5, 1)),
               CapabilityError);
}

}  // namespace
}  // namespace spqr
