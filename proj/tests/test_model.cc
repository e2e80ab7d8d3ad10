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
#include <cstdio>
#include <filesystem>

#include "oracles.h"
#include "spqr/errors.h"
#include "spqr/model.h"
#include "spqr/model_file.h"

namespace spqr {
namespace {

FittedModel random_model(std::mt19937_64& rng, Method method, int samples = 1) {
  FittedModel m;
  m.shape = testing::random_shape(rng, rng() % 2 ? Activation::kRelu : Activation::kTanh,
                                  1 + static_cast<int>(rng() % 2));
  m.basis = SplineBasis(m.shape.outputs);
  m.method = method;
  for (int s = 0; s < samples; ++s) m.weights.push_back(testing::random_weights(m.shape, rng, 1.5));
  if (method != Method::kMLE) m.prior = PriorConfig{PriorKind::kARD};
  m.seed = rng();
  return m;
}

FittedModel degenerate_model(int k) {
  FittedModel m;
  m.shape = NetworkShape{1, {2}, 10, Activation::kTanh};
  m.basis = SplineBasis(10);
  WeightSet w(m.shape);
  w.layer(1)(k, 0) = 800.0;
  m.weights.push_back(w);
  return m;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) out[i++] = d;
  return out;
}

TEST(Mixture, KnownValues) {
  FittedModel zero;
  zero.shape = NetworkShape{2, {3}, 10, Activation::kTanh};
  zero.weights.push_back(WeightSet(zero.shape));
  EXPECT_NEAR(pdf(zero, vec({0.1, 0.2}), 0.0), 1.8, 1e-14);
  EXPECT_TRUE(coef(zero, vec({0.1, 0.2})).isApprox(Eigen::VectorXd::Constant(10, 0.1)));

  const FittedModel e1 = degenerate_model(0);
  EXPECT_NEAR(cdf(e1, vec({0.3}), 1.0 / 18), 0.75, 1e-12);
  EXPECT_NEAR(quantile(e1, vec({0.3}), 0.5), (1 - std::sqrt(0.5)) / 9, 1e-7);
}

TEST(Mixture, DensityValidity) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    const FittedModel m = random_model(rng, Method::kMLE);
    const Eigen::VectorXd x = testing::random_data(m.shape.inputs, 1, rng).x.row(0).transpose();
    const Mixture mix(m.basis, coef(m, x));
    const auto f = [&](double y) { return mix.pdf(y); };
    EXPECT_NEAR(testing::integrate(f, 0.0, 1.0, m.basis.knots()), 1.0, 1e-8);
    EXPECT_EQ(mix.cdf(0.0), 0.0);
    EXPECT_NEAR(mix.cdf(1.0), 1.0, 1e-15);
    double prev = 0.0;
    for (int i = 1; i <= 200; ++i) {
      const double y = i / 200.0;
      EXPECT_NEAR(mix.cdf(y), testing::integrate(f, 0.0, y, m.basis.knots()), 1e-8);
      EXPECT_GE(mix.cdf(y), prev);
      prev = mix.cdf(y);
    }
  }
}

TEST(Mixture, QuantileInvertsCdf) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    const FittedModel m = random_model(rng, Method::kMLE);
    const Eigen::VectorXd x = testing::random_data(m.shape.inputs, 1, rng).x.row(0).transpose();
    const Mixture mix(m.basis, coef(m, x));
    double prev = 0.0;
    for (int t = 1; t <= 99; ++t) {
      const double q = mix.quantile(t / 100.0);
      EXPECT_GE(q, prev);
      EXPECT_NEAR(mix.cdf(q), t / 100.0, 1e-6);
      prev = q;
    }
  }
}

TEST(Normalization, ExternalDensityScales) {
  FittedModel m;
  m.shape = NetworkShape{1, {2}, 10, Activation::kTanh};
  m.weights.push_back(WeightSet(m.shape));
  Eigen::MatrixXd x(2, 1);
  x << 0.0, 1.0;
  m.normalization = Normalization::from_data(x, vec({-1.0, 1.0}));
  PredictOptions opt;
  opt.grid = std::vector<double>{0.0};
  const PredictionResult r = predict_curves(m, Eigen::MatrixXd::Constant(1, 1, 0.5),
                                            CurveKind::kPDF, opt);
  const double internal = pdf(m, vec({0.5}), 0.5);
  EXPECT_NEAR(r.mean(0, 0), internal / 2.0, 1e-14);
}

TEST(Normalization, RoundTrip) {
  std::mt19937_64 rng(3);
  FittedModel m = random_model(rng, Method::kMLE);
  const Dataset d = testing::random_data(m.shape.inputs, 20, rng);
  Eigen::MatrixXd x = 3.0 * d.x.array() - 1.0;
  Eigen::VectorXd y = 5.0 * d.y.array() + 2.0;
  m.normalization = Normalization::from_data(x, y);
  const std::vector<double> taus{0.1, 0.5, 0.9};
  PredictOptions opt;
  opt.grid = taus;
  const PredictionResult ext = predict_curves(m, x, CurveKind::kQF, opt);
  const Eigen::MatrixXd xu = m.normalization.x_to_unit(x, nullptr);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (size_t t = 0; t < taus.size(); ++t) {
      const double internal = quantile(m, xu.row(i).transpose(), taus[t]);
      EXPECT_NEAR(ext.mean(i, static_cast<Eigen::Index>(t)),
                  m.normalization.y_from_unit(internal), 1e-10);
    }
  }
}

TEST(Normalization, RejectsOutOfRangeWithoutNormalization) {
  Normalization n;
  EXPECT_THROW(n.y_to_unit(1.5, nullptr), DomainError);
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 1);
  EXPECT_THROW(Normalization::from_data(x, vec({0.1, 0.2, 0.3})), ValidationError);
}

TEST(Predict, CurveShapesAndDefaults) {
  std::mt19937_64 rng(4);
  const FittedModel m = random_model(rng, Method::kMLE);
  const Dataset d = testing::random_data(m.shape.inputs, 5, rng);
  const PredictionResult pdfs = predict_curves(m, d.x, CurveKind::kPDF);
  EXPECT_EQ(pdfs.grid.size(), 101u);
  const PredictionResult cdfs = predict_curves(m, d.x, CurveKind::kCDF);
  for (Eigen::Index i = 0; i < 5; ++i) {
    for (Eigen::Index g = 1; g < 101; ++g) EXPECT_GE(cdfs.mean(i, g), cdfs.mean(i, g - 1));
  }
  const PredictionResult qf = predict_curves(m, d.x, CurveKind::kQF);
  ASSERT_EQ(qf.grid.size(), 99u);
  EXPECT_DOUBLE_EQ(qf.grid.front(), 0.01);
  EXPECT_DOUBLE_EQ(qf.grid.back(), 0.99);
  for (Eigen::Index i = 0; i < 5; ++i) {
    for (Eigen::Index g = 1; g < 99; ++g) EXPECT_GE(qf.mean(i, g), qf.mean(i, g - 1));
  }
}

TEST(Predict, UncertaintyNeedsPosterior) {
  std::mt19937_64 rng(5);
  const FittedModel m = random_model(rng, Method::kMAP);
  PredictOptions opt;
  opt.ci_level = 0.9;
  EXPECT_THROW(predict_curves(m, Eigen::MatrixXd::Zero(1, m.shape.inputs), CurveKind::kQF, opt),
               CapabilityError);
  opt.ci_level.reset();
  opt.get_all = true;
  EXPECT_THROW(predict_curves(m, Eigen::MatrixXd::Zero(1, m.shape.inputs), CurveKind::kQF, opt),
               CapabilityError);
}

TEST(Predict, PosteriorBandsAndSamples) {
  std::mt19937_64 rng(6);
  const FittedModel m = random_model(rng, Method::kMCMC, 40);
  const Dataset d = testing::random_data(m.shape.inputs, 3, rng);
  PredictOptions opt;
  opt.ci_level = 0.95;
  opt.get_all = true;
  opt.grid = std::vector<double>{0.2, 0.7};
  const PredictionResult r = predict_curves(m, d.x, CurveKind::kCDF, opt);
  ASSERT_EQ(r.samples.size(), 40u);
  for (int s = 0; s < 40; ++s) {
    FittedModel one = m;
    one.method = Method::kMLE;
    one.weights = {m.weights[s]};
    const PredictionResult single = predict_curves(one, d.x, CurveKind::kCDF, {opt.grid});
    EXPECT_EQ(single.mean, r.samples[s]);
  }
  for (Eigen::Index i = 0; i < 3; ++i) {
    std::vector<double> v;
    for (const auto& s : r.samples) v.push_back(s(i, 1));
    std::sort(v.begin(), v.end());
    // type-7 quantile at 2.5%: h = 39 * 0.025
    const double h = 39 * 0.025;
    EXPECT_NEAR((*r.lower)(i, 1), v[0] + (h - 0) * (v[1] - v[0]), 1e-14);
    EXPECT_LE((*r.lower)(i, 1), r.mean(i, 1));
    EXPECT_GE((*r.upper)(i, 1), r.mean(i, 1));
  }
}

TEST(Predict, IdenticalSamplesMatchPointEstimate) {
  std::mt19937_64 rng(7);
  FittedModel point = random_model(rng, Method::kMLE);
  FittedModel post = point;
  post.method = Method::kMCMC;
  post.weights.assign(4, point.weights[0]);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(point.shape.inputs, 0.4);
  EXPECT_LT((coef(post, x) - coef(point, x)).cwiseAbs().maxCoeff(), 1e-15);
  FittedModel one = point;
  one.method = Method::kMCMC;
  EXPECT_EQ(predict_quantiles(one, x.transpose(), {0.1, 0.5}),
            predict_quantiles(point, x.transpose(), {0.1, 0.5}));
}

TEST(ModelFile, RoundTripIsBitIdentical) {
  std::mt19937_64 rng(8);
  for (Method method : {Method::kMLE, Method::kMAP, Method::kMCMC}) {
    for (int rep = 0; rep < 10; ++rep) {
      FittedModel m = random_model(rng, method, method == Method::kMCMC ? 5 : 1);
      m.log.train_loss = {1.0, 0.5};
      m.log.valid_loss = {1.1, std::nan("")};
      m.log.best_epoch = 0;
      const std::string bytes = serialize_model(m);
      const FittedModel back = deserialize_model(bytes);
      EXPECT_EQ(serialize_model(back), bytes);
      const Dataset d = testing::random_data(m.shape.inputs, 4, rng);
      EXPECT_EQ(predict_curves(back, d.x, CurveKind::kQF).mean,
                predict_curves(m, d.x, CurveKind::kQF).mean);
      EXPECT_TRUE(std::isnan(back.log.valid_loss[1]));
    }
  }
}

TEST(ModelFile, RejectsCorruptInput) {
  std::mt19937_64 rng(9);
  const std::string bytes = serialize_model(random_model(rng, Method::kMLE));
  EXPECT_THROW(deserialize_model("garbage"), ValidationError);
  EXPECT_THROW(deserialize_model(bytes.substr(0, bytes.size() - 3)), ValidationError);
  std::string wrong = bytes;
  wrong.replace(0, 12, "SPQR-MODEL 9");
  EXPECT_THROW(deserialize_model(wrong), ValidationError);
}

TEST(ModelFile, SaveAndLoad) {
  std::mt19937_64 rng(10);
  const FittedModel m = random_model(rng, Method::kMAP);
  const auto path = std::filesystem::temp_directory_path() / "spqr_test_model.bin";
  save_model(m, path.string());
  EXPECT_EQ(serialize_model(load_model(path.string())), serialize_model(m));
  std::filesystem::remove(path);
  EXPECT_THROW(load_model(path.string()), ValidationError);
}

}  // namespace
}  // namespace spqr
