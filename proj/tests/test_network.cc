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
#include <numeric>

#include "oracles.h"
#include "spqr/basis.h"
#include "spqr/network.h"

namespace spqr {
namespace {

// Loop-based forward pass used as an oracle.
Eigen::VectorXd naive_forward(const NetworkShape& shape, const WeightSet& w,
                              const Eigen::VectorXd& x) {
  std::vector<double> h(x.data(), x.data() + x.size());
  for (int l = 0; l < w.num_layers(); ++l) {
    const auto m = w.layer(l);
    std::vector<double> next(m.rows());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      double s = m(r, 0);
      for (size_t c = 0; c < h.size(); ++c) s += m(r, c + 1) * h[c];
      next[r] = s;
    }
    if (l + 1 < w.num_layers()) {
      for (double& v : next) {
        v = shape.activation == Activation::kTanh ? std::tanh(v) : std::max(0.0, v);
      }
    }
    h = next;
  }
  const double top = *std::max_element(h.begin(), h.end());
  double z = 0.0;
  for (double& v : h) z += (v = std::exp(v - top));
  Eigen::VectorXd theta(h.size());
  for (size_t k = 0; k < h.size(); ++k) theta[k] = h[k] / z;
  return theta;
}

double naive_loglik(const NetworkShape& shape, const WeightSet& w, const Dataset& d,
                    const SplineBasis& b) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const Eigen::VectorXd theta = naive_forward(shape, w, d.x.row(i).transpose());
    double dens = 0.0;
    for (int k = 0; k < b.size(); ++k) {
      dens += theta[k] * testing::m_spline_recursive(b.knots(), k, 2, d.y[i]);
    }
    total += std::log(dens);
  }
  return total;
}

TEST(Network, ZeroWeightsGiveUniformTheta) {
  NetworkShape s{3, {4}, 10, Activation::kTanh};
  const WeightSet w(s);
  Eigen::VectorXd x(3);
  x << 0.2, 0.7, 0.1;
  EXPECT_TRUE(forward(s, w, x).isApprox(Eigen::VectorXd::Constant(10, 0.1), 1e-15));
}

TEST(Network, SoftmaxShiftInvariance) {
  std::mt19937_64 rng(3);
  NetworkShape s{2, {3}, 6, Activation::kTanh};
  WeightSet w = testing::random_weights(s, rng);
  Eigen::VectorXd x(2);
  x << 0.3, 0.9;
  const Eigen::VectorXd before = forward(s, w, x);
  w.layer(1).col(0).array() += 7.5;
  EXPECT_LT((forward(s, w, x) - before).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(before.sum(), 1.0, 1e-12);
}

TEST(Network, ForwardMatchesNaive) {
  std::mt19937_64 rng(5);
  for (Activation act : {Activation::kTanh, Activation::kRelu}) {
    for (int layers = 1; layers <= 2; ++layers) {
      const NetworkShape s = testing::random_shape(rng, act, layers);
      const WeightSet w = testing::random_weights(s, rng);
      const Dataset d = testing::random_data(s.inputs, 7, rng);
      const Eigen::MatrixXd batch = forward_batch(s, w, d.x);
      for (Eigen::Index i = 0; i < d.size(); ++i) {
        EXPECT_LT((batch.row(i).transpose() - naive_forward(s, w, d.x.row(i).transpose()))
                      .cwiseAbs()
                      .maxCoeff(),
                  1e-13);
      }
    }
  }
}

TEST(Likelihood, SingleObservationAtZero) {
  NetworkShape s{1, {2}, 10, Activation::kTanh};
  Dataset d;
  d.x = Eigen::MatrixXd::Constant(1, 1, 0.5);
  d.y = Eigen::VectorXd::Zero(1);
  EXPECT_NEAR(log_likelihood(s, WeightSet(s), d, SplineBasis(10)), std::log(1.8), 1e-14);
}

TEST(Likelihood, DegenerateMixture) {
  NetworkShape s{1, {2}, 8, Activation::kTanh};
  WeightSet w(s);
  w.layer(1)(3, 0) = 800.0;  // all mass on basis 3
  std::mt19937_64 rng(1);
  Dataset d = testing::random_data(1, 20, rng);
  const SplineBasis b(8);
  for (Eigen::Index i = 0; i < d.size(); ++i) d.y[i] = 2.0 / 7 + d.y[i] / 7;
  double expected = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) expected += std::log(b.m_value(3, d.y[i]));
  EXPECT_NEAR(log_likelihood(s, w, d, b), expected, 1e-9);
}

TEST(Likelihood, MatchesTermByTermOracle) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const Activation act = rep % 2 ? Activation::kRelu : Activation::kTanh;
    const NetworkShape s = testing::random_shape(rng, act, 1 + rep % 2);
    const SplineBasis b(s.outputs);
    const WeightSet w = testing::random_weights(s, rng);
    const Dataset d = testing::random_data(s.inputs, 15, rng);
    EXPECT_NEAR(log_likelihood(s, w, d, b), naive_loglik(s, w, d, b), 1e-11);
  }
}

TEST(Likelihood, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    const Activation act = rep % 2 ? Activation::kRelu : Activation::kTanh;
    const NetworkShape s = testing::random_shape(rng, act, 1 + (rep / 2) % 2);
    const SplineBasis b(s.outputs);
    const WeightSet w = testing::random_weights(s, rng);
    const Dataset d = testing::random_data(s.inputs, 12, rng);
    const WeightSet g = grad_log_likelihood(s, w, d, b);
    const auto f = [&](const Eigen::VectorXd& v) {
      return log_likelihood(s, WeightSet(s, v), d, b);
    };
    EXPECT_LT(testing::gradient_error(f, w.flat(), g.flat()), 1e-5) << rep;
  }
}

TEST(Likelihood, DuplicatedZeroColumnGradient) {
  std::mt19937_64 rng(23);
  NetworkShape s{2, {3}, 6, Activation::kTanh};
  WeightSet w = testing::random_weights(s, rng);
  w.layer(0).col(2).setZero();
  Dataset d = testing::random_data(2, 10, rng);
  d.x.col(1) = d.x.col(0);
  const SplineBasis b(6);
  const WeightSet g = grad_log_likelihood(s, w, d, b);
  const auto f = [&](const Eigen::VectorXd& v) {
    return log_likelihood(s, WeightSet(s, v), d, b);
  };
  EXPECT_LT(testing::gradient_error(f, w.flat(), g.flat()), 1e-6);
}

TEST(Likelihood, DoublingDataDoublesGradient) {
  std::mt19937_64 rng(29);
  NetworkShape s{2, {4, 3}, 7, Activation::kTanh};
  const WeightSet w = testing::random_weights(s, rng);
  const Dataset d = testing::random_data(2, 9, rng);
  Dataset dd;
  dd.x.resize(18, 2);
  dd.x << d.x, d.x;
  dd.y.resize(18);
  dd.y << d.y, d.y;
  const SplineBasis b(7);
  const Eigen::VectorXd g1 = grad_log_likelihood(s, w, d, b).flat();
  const Eigen::VectorXd g2 = grad_log_likelihood(s, w, dd, b).flat();
  EXPECT_LT((g2 - 2.0 * g1).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + g1.cwiseAbs().maxCoeff()));
}

TEST(Likelihood, PermutationInvariant) {
  std::mt19937_64 rng(31);
  NetworkShape s{3, {5}, 9, Activation::kRelu};
  const WeightSet w = testing::random_weights(s, rng);
  const Dataset d = testing::random_data(3, 25, rng);
  std::vector<Eigen::Index> perm(25);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const SplineBasis b(9);
  EXPECT_NEAR(log_likelihood(s, w, d, b), log_likelihood(s, w, d.subset(perm), b), 1e-11);
}

TEST(Likelihood, BatchAndPointwiseAgree) {
  std::mt19937_64 rng(37);
  NetworkShape s{2, {3}, 6, Activation::kTanh};
  const WeightSet w = testing::random_weights(s, rng);
  const Dataset d = testing::random_data(2, 10, rng);
  const Likelihood lik(s, d, SplineBasis(6));
  std::vector<Eigen::Index> rows{1, 4, 7};
  const Eigen::VectorXd pw = lik.pointwise(w);
  EXPECT_NEAR(pw.sum(), lik.value(w).value, 1e-12);
  EXPECT_NEAR(lik.batch(w, rows, nullptr).value, pw[1] + pw[4] + pw[7], 1e-12);
}

TEST(Dropout, ZeroRateMasksAreNoOp) {
  std::mt19937_64 rng(41);
  NetworkShape s{2, {4, 3}, 6, Activation::kTanh};
  const WeightSet w = testing::random_weights(s, rng);
  const Dataset d = testing::random_data(2, 10, rng);
  const Likelihood lik(s, d, SplineBasis(6));
  std::vector<Eigen::Index> rows{0, 2, 3, 9};
  const DropoutMasks masks = make_dropout_masks(s, 4, 0.0, 0.0, rng);
  WeightSet g1(s), g2(s);
  const double v1 = lik.batch(w, rows, &g1).value;
  const double v2 = lik.batch(w, rows, &g2, &masks).value;
  EXPECT_EQ(v1, v2);
  EXPECT_EQ(g1.flat(), g2.flat());
}

TEST(Dropout, GradientWithMasks) {
  std::mt19937_64 rng(43);
  NetworkShape s{2, {5, 4}, 6, Activation::kTanh};
  const WeightSet w = testing::random_weights(s, rng);
  const Dataset d = testing::random_data(2, 8, rng);
  const Likelihood lik(s, d, SplineBasis(6));
  std::vector<Eigen::Index> rows{0, 1, 2, 3, 4, 5, 6, 7};
  const DropoutMasks masks = make_dropout_masks(s, 8, 0.3, 0.2, rng);
  WeightSet g(s);
  lik.batch(w, rows, &g, &masks);
  const auto f = [&](const Eigen::VectorXd& v) {
    return lik.batch(WeightSet(s, v), rows, nullptr, &masks).value;
  };
  EXPECT_LT(testing::gradient_error(f, w.flat(), g.flat()), 1e-6);
}

}  // namespace
}  // namespace spqr
