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

#include "spqr/simulate.h"

#include <cmath>
#include <random>

#include <boost/math/distributions/beta.hpp>

#include "spqr/errors.h"

namespace spqr {
namespace {

double expit(double u) { return 1.0 / (1.0 + std::exp(-u)); }

boost::math::beta_distribution<double> distribution(const Eigen::VectorXd& x) {
  const BetaShape s = beta_shape(x);
  return boost::math::beta_distribution<double>(s.a, s.b);
}

}  // namespace

BetaShape beta_shape(const Eigen::VectorXd& x) {
  if (x.size() < 2) throw ValidationError("design needs at least two covariates");
  const double m = expit(1.0 - 5.0 * x[0] * x[1]);
  return {10.0 * m, 10.0 * (1.0 - m)};
}

Dataset simulate_beta(Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("n must be at least 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Dataset d;
  d.x.resize(n, 3);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) d.x(i, j) = unif(rng);
    const BetaShape s = beta_shape(d.x.row(i).transpose());
    std::gamma_distribution<double> ga(s.a, 1.0);
    std::gamma_distribution<double> gb(s.b, 1.0);
    const double u = ga(rng);
    const double v = gb(rng);
    d.y[i] = u / (u + v);
  }
  return d;
}

double true_pdf(const Eigen::VectorXd& x, double y) {
  if (!(y >= 0.0 && y <= 1.0)) throw DomainError("y outside [0,1]");
  return boost::math::pdf(distribution(x), y);
}

double true_cdf(const Eigen::VectorXd& x, double y) {
  if (!(y >= 0.0 && y <= 1.0)) throw DomainError("y outside [0,1]");
  return boost::math::cdf(distribution(x), y);
}

double true_quantile(const Eigen::VectorXd& x, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("tau outside (0,1)");
  return boost::math::quantile(distribution(x), tau);
}

}  // namespace spqr
