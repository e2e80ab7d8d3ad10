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

#ifndef SPQR_SIMULATE_H_
#define SPQR_SIMULATE_H_

#include <cstdint>

#include <Eigen/Dense>

#include "spqr/network.h"

namespace spqr {

// Benchmark design: X_j ~ U(0,1) for j = 1..3 and
//   Y | X ~ Beta(10 expit(1 - 5 X1 X2), 10 (1 - expit(1 - 5 X1 X2))).
// X3 has no effect on Y.
Dataset simulate_beta(Eigen::Index n, std::uint64_t seed);

struct BetaShape {
  double a = 0.0;
  double b = 0.0;
};
BetaShape beta_shape(const Eigen::VectorXd& x);

// True conditional density, CDF and quantile of the design.
double true_pdf(const Eigen::VectorXd& x, double y);
double true_cdf(const Eigen::VectorXd& x, double y);
double true_quantile(const Eigen::VectorXd& x, double tau);

}  // namespace spqr

#endif  // SPQR_SIMULATE_H_
