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

#include "oracles.h"
#include "spqr/errors.h"
#include "spqr/interpret.h"
#include "spqr/simulate.h"

namespace spqr {
namespace {

const std::vector<double> kTau{0.1, 0.5, 0.9};

Eigen::MatrixXd uniform_design(Eigen::Index n, int p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return testing::random_data(p, n, rng).x;
}

// Builds a QuantileFn from a scalar function of (row, tau).
QuantileFn from(std::function<double(const Eigen::VectorXd&, double)> f) {
  return [f](const Eigen::MatrixXd& x, const std::vector<double>& taus) {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(taus.size()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (size_t t = 0; t < taus.size(); ++t) {
        out(i, static_cast<Eigen::Index>(t)) = f(x.row(i).transpose(), taus[t]);
      }
    }
    return out;
  };
}

double weighted_mean(const ALEResult& r, Eigen::Index t) {
  const Eigen::MatrixXd m = ale_bin_means(r);
  double s = 0.0, n = 0.0;
  for (Eigen::Index b = 0; b < m.rows(); ++b) {
    s += r.counts[b] * m(b, t);
    n += r.counts[b];
  }
  return s / n;
}

TEST(AleEdges, QuantileEdgesAndBins) {
  Eigen::VectorXd x(10);
  x << 5, 1, 2, 2, 3, 9, 7, 4, 6, 8;
  const std::vector<double> edges = ale_edges(x, 5);
  EXPECT_EQ(edges, (std::vector<double>{1, 2, 3, 5, 7, 9}));
  const std::vector<int> bins = ale_bins(x, edges);
  // right-closed bins, the minimum joins the first bin
  EXPECT_EQ(bins, (std::vector<int>{2, 0, 0, 0, 1, 4, 3, 2, 3, 4}));
}

TEST(QaleMain, LinearPrediction) {
  const Eigen::MatrixXd x = uniform_design(500, 2, 1);
  const ALEResult r = qale_main(from([](const Eigen::VectorXd& v, double) { return v[0]; }),
                                x, 0, kTau, 20);
  for (size_t t = 0; t < kTau.size(); ++t) {
    const auto tt = static_cast<Eigen::Index>(t);
    double centre = 0.0, n = 0.0;
    for (size_t b = 0; b + 1 < r.bin_edges[0].size(); ++b) {
      centre += r.counts[b] * 0.5 * (r.bin_edges[0][b] + r.bin_edges[0][b + 1]);
      n += r.counts[b];
    }
    centre /= n;
    for (size_t e = 0; e < r.bin_edges[0].size(); ++e) {
      EXPECT_NEAR(r.ale(static_cast<Eigen::Index>(e), tt), r.bin_edges[0][e] - centre, 1e-10);
    }
    EXPECT_NEAR(weighted_mean(r, tt), 0.0, 1e-10);
  }
}

TEST(QaleMain, ConstantPredictionIsZero) {
  const Eigen::MatrixXd x = uniform_design(300, 3, 2);
  const ALEResult r = qale_main(
      from([](const Eigen::VectorXd& v, double tau) { return tau + 3 * v[1]; }), x, 0, kTau);
  EXPECT_LT(r.ale.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(QaleMain, SumOfEffects) {
  const Eigen::MatrixXd x = uniform_design(400, 2, 3);
  const auto f = [](const Eigen::VectorXd& v, double tau) { return std::sin(3 * v[0]) * tau; };
  const auto g = [](const Eigen::VectorXd& v, double) { return v[0] * v[0] + v[1]; };
  const ALEResult rf = qale_main(from(f), x, 0, kTau, 15);
  const ALEResult rg = qale_main(from(g), x, 0, kTau, 15);
  const ALEResult rs = qale_main(
      from([&](const Eigen::VectorXd& v, double t) { return f(v, t) + g(v, t); }), x, 0, kTau, 15);
  EXPECT_LT((rs.ale - rf.ale - rg.ale).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(QaleInteraction, AdditiveIsZero) {
  const Eigen::MatrixXd x = uniform_design(600, 2, 4);
  const ALEResult r = qale_interaction(
      from([](const Eigen::VectorXd& v, double tau) {
        return v[0] * v[0] * tau + std::pow(v[1], 3) - v[1];
      }),
      x, 0, 1, kTau, 10);
  ASSERT_TRUE(r.is_interaction());
  for (const auto& s : r.surface) EXPECT_LT(s.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(QaleInteraction, Bilinear) {
  const Eigen::MatrixXd x = uniform_design(4000, 2, 5);
  const ALEResult r = qale_interaction(
      from([](const Eigen::VectorXd& v, double) { return v[0] * v[1]; }), x, 0, 1, {0.5}, 20);
  const double m0 = x.col(0).mean(), m1 = x.col(1).mean();
  double worst = 0.0;
  for (size_t a = 0; a < r.bin_edges[0].size(); ++a) {
    for (size_t b = 0; b < r.bin_edges[1].size(); ++b) {
      const double expect = (r.bin_edges[0][a] - m0) * (r.bin_edges[1][b] - m1);
      worst = std::max(worst, std::abs(r.surface[0](static_cast<Eigen::Index>(a),
                                                    static_cast<Eigen::Index>(b)) -
                                       expect));
    }
  }
  EXPECT_LT(worst, 0.03);
}

TEST(QaleInteraction, SimulationOracleHasInteraction) {
  const Eigen::MatrixXd x = uniform_design(1000, 3, 6);
  const auto truth = from([](const Eigen::VectorXd& v, double tau) { return true_quantile(v, tau); });
  const auto additive = from([](const Eigen::VectorXd& v, double tau) {
    Eigen::VectorXd a = v, b = v, c = v;
    a[1] = 0.5;
    b[0] = 0.5;
    c[0] = c[1] = 0.5;
    return true_quantile(a, tau) + true_quantile(b, tau) - true_quantile(c, tau);
  });
  const double real = qale_interaction(truth, x, 0, 1, {0.5}, 10).surface[0].cwiseAbs().maxCoeff();
  const double floor = qale_interaction(additive, x, 0, 1, {0.5}, 10).surface[0].cwiseAbs().maxCoeff();
  EXPECT_GT(real, 5.0 * floor);
  EXPECT_GT(real, 1e-3);
}

TEST(QaleMain, SimulationOracleIgnoresX3) {
  const Eigen::MatrixXd x = uniform_design(1000, 3, 7);
  const auto truth = from([](const Eigen::VectorXd& v, double tau) { return true_quantile(v, tau); });
  const double x1 = qale_main(truth, x, 0, {0.5}).ale.cwiseAbs().maxCoeff();
  const double x3 = qale_main(truth, x, 2, {0.5}).ale.cwiseAbs().maxCoeff();
  EXPECT_LT(x3, 0.25 * x1);
}

TEST(Qvi, ConstantLinearAndBinary) {
  const Eigen::MatrixXd x = uniform_design(20000, 2, 8);
  const ImportanceResult lin =
      qvi(from([](const Eigen::VectorXd& v, double) { return v[0]; }), x, {0, 1}, {0.5}, 100);
  EXPECT_NEAR(lin.vi(0, 0) / (1.0 / std::sqrt(12.0)), 1.0, 0.02);
  EXPECT_NEAR(lin.vi(1, 0), 0.0, 1e-12);
  EXPECT_EQ(lin.kind[0], ImportanceKind::kSD);

  Eigen::MatrixXd b = x;
  for (Eigen::Index i = 0; i < b.rows(); ++i) b(i, 1) = b(i, 1) < 0.3 ? 0.0 : 1.0;
  const ImportanceResult bin = qvi(
      from([](const Eigen::VectorXd& v, double) { return -2.5 * v[1] + v[0]; }), b, {1}, {0.5});
  EXPECT_EQ(bin.kind[0], ImportanceKind::kRange);
  EXPECT_NEAR(bin.vi(0, 0), 2.5, 1e-12);
}

TEST(Qvi, ShiftInvariant) {
  const Eigen::MatrixXd x = uniform_design(500, 2, 9);
  const auto f = [](const Eigen::VectorXd& v, double tau) { return std::exp(v[0]) * tau + v[1]; };
  const ImportanceResult a = qvi(from(f), x, {0, 1}, kTau);
  const ImportanceResult b =
      qvi(from([&](const Eigen::VectorXd& v, double t) { return f(v, t) + 11.0; }), x, {0, 1}, kTau);
  EXPECT_LT((a.vi - b.vi).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pit, OracleIsUniform) {
  const Dataset d = simulate_beta(1000, 10);
  Eigen::VectorXd u(1000);
  for (Eigen::Index i = 0; i < 1000; ++i) u[i] = true_cdf(d.x.row(i).transpose(), d.y[i]);
  EXPECT_GE(u.minCoeff(), 0.0);
  EXPECT_LE(u.maxCoeff(), 1.0);
  EXPECT_LT(ks_distance(u), 1.36 / std::sqrt(1000.0));
}

TEST(Pit, UniformModelIsWorseThanOracle) {
  const Dataset d = simulate_beta(1000, 11);
  FittedModel m;
  m.shape = NetworkShape{3, {4}, 10, Activation::kTanh};
  m.weights = {WeightSet(m.shape)};
  const PitResult r = pit(m, d.x, d.y);
  EXPECT_GE(r.u.minCoeff(), 0.0);
  EXPECT_LE(r.u.maxCoeff(), 1.0);
  Eigen::VectorXd oracle(1000);
  for (Eigen::Index i = 0; i < 1000; ++i) oracle[i] = true_cdf(d.x.row(i).transpose(), d.y[i]);
  EXPECT_GT(ks_distance(r.u), ks_distance(oracle));
  EXPECT_THROW(pit(m, d.x, d.y, true), CapabilityError);
}

TEST(KsDistance, KnownValue) {
  Eigen::VectorXd u(2);
  u << 0.1, 0.2;
  EXPECT_NEAR(ks_distance(u), 0.8, 1e-15);
}

TEST(Waic, ConstantColumns) {
  Eigen::MatrixXd ll(5, 3);
  ll.col(0).setConstant(-1.0);
  ll.col(1).setConstant(0.5);
  ll.col(2).setConstant(2.0);
  const WaicResult w = waic(ll);
  EXPECT_NEAR(w.penalty, 0.0, 1e-15);
  EXPECT_NEAR(w.elpd, 1.5, 1e-14);
  EXPECT_NEAR(loo_is(ll).elpd, 1.5, 1e-14);
}

TEST(Waic, TwoSamples) {
  const double a = 0.3, b = 2.0;
  Eigen::MatrixXd ll(2, 1);
  ll << std::log(a), std::log(b);
  const WaicResult w = waic(ll);
  EXPECT_NEAR(w.lpd, std::log((a + b) / 2), 1e-14);
  const double d = std::log(a) - std::log(b);
  EXPECT_NEAR(w.penalty, d * d / 2, 1e-14);
}

TEST(Waic, ShiftAndPenaltySign) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n;
  Eigen::MatrixXd ll(50, 8);
  for (Eigen::Index i = 0; i < ll.size(); ++i) ll.data()[i] = n(rng);
  const WaicResult w = waic(ll);
  EXPECT_LE(w.elpd, w.lpd);
  Eigen::MatrixXd shifted = ll;
  shifted.col(3).array() += 4.25;
  EXPECT_NEAR(waic(shifted).elpd - w.elpd, 4.25, 1e-12);
  EXPECT_NEAR(loo_is(shifted).elpd - loo_is(ll).elpd, 4.25, 1e-12);
}

TEST(Loo, DominatedSampleStaysFinite) {
  Eigen::MatrixXd ll = Eigen::MatrixXd::Constant(10, 2, -2.0);
  ll(3, 0) = -800.0;
  ll(4, 1) = 750.0;
  EXPECT_TRUE(std::isfinite(loo_is(ll).elpd));
  EXPECT_TRUE(std::isfinite(waic(ll).elpd));
  EXPECT_THROW(waic(Eigen::MatrixXd::Zero(1, 4)), ValidationError);
}

}  // namespace
}  // namespace spqr
