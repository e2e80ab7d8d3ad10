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

#include "spqr/basis.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spqr/errors.h"

namespace spqr {

SplineBasis::SplineBasis(int num_basis) : num_basis_(num_basis) {
  if (num_basis < kMinBasis) {
    std::ostringstream msg;
    msg << "number of basis functions must be at least " << kMinBasis
        << " (got " << num_basis << ")";
    throw ValidationError(msg.str());
  }
  spacing_ = 1.0 / (num_basis - 1);
  knots_.resize(num_basis + 2);
  knots_[0] = 0.0;
  for (int j = 0; j < num_basis; ++j) {
    knots_[j + 1] = static_cast<double>(j) / (num_basis - 1);
  }
  knots_[num_basis] = 1.0;
  knots_[num_basis + 1] = 1.0;
}

void SplineBasis::check_domain(double y) const {
  if (!(y >= 0.0 && y <= 1.0)) {
    std::ostringstream msg;
    msg << "spline argument " << y << " outside [0,1]";
    throw DomainError(msg.str());
  }
}

void SplineBasis::support(int k, double& a, double& b, double& c) const {
  a = knots_[k];
  b = knots_[k + 1];
  c = knots_[k + 2];
}

int SplineBasis::interval_of(double y) const {
  const int last = num_basis_ - 2;
  int j = std::clamp(static_cast<int>(std::floor(y * (num_basis_ - 1))), 0,
                     last);
  while (j > 0 && y < distinct_knot(j)) --j;
  while (j < last && y >= distinct_knot(j + 1)) ++j;
  return j;
}

double SplineBasis::m_value(int k, double y) const {
  double a, b, c;
  support(k, a, b, c);
  if (y < a || y > c) return 0.0;
  if (y < b) return 2.0 * (y - a) / ((c - a) * (b - a));
  if (c > b) return 2.0 * (c - y) / ((c - a) * (c - b));
  return 2.0 / (c - a);
}

double SplineBasis::i_value(int k, double y) const {
  double a, b, c;
  support(k, a, b, c);
  if (y <= a) return 0.0;
  if (y >= c) return 1.0;
  if (y < b) return (y - a) * (y - a) / ((c - a) * (b - a));
  return 1.0 - (c - y) * (c - y) / ((c - a) * (c - b));
}

SplineBasis::Local SplineBasis::local_m(double y) const {
  check_domain(y);
  Local out;
  out.interval = interval_of(y);
  out.first = m_value(out.interval, y);
  out.second = m_value(out.interval + 1, y);
  return out;
}

SplineBasis::Local SplineBasis::local_i(double y) const {
  check_domain(y);
  Local out;
  out.interval = interval_of(y);
  out.first = i_value(out.interval, y);
  out.second = i_value(out.interval + 1, y);
  return out;
}

Eigen::VectorXd SplineBasis::eval_m(double y) const {
  const Local loc = local_m(y);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(num_basis_);
  out[loc.interval] = loc.first;
  out[loc.interval + 1] = loc.second;
  return out;
}

Eigen::VectorXd SplineBasis::eval_i(double y) const {
  const Local loc = local_i(y);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(num_basis_);
  out.head(loc.interval).setOnes();
  out[loc.interval] = loc.first;
  out[loc.interval + 1] = loc.second;
  return out;
}

Eigen::MatrixXd basis_matrix(const SplineBasis& basis,
                             const Eigen::VectorXd& y) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(y.size(), basis.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const SplineBasis::Local loc = basis.local_m(y[i]);
    out(i, loc.interval) = loc.first;
    out(i, loc.interval + 1) = loc.second;
  }
  return out;
}

}  // namespace spqr
