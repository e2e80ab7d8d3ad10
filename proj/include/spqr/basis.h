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

#ifndef SPQR_BASIS_H_
#define SPQR_BASIS_H_

#include <vector>

#include <Eigen/Dense>

namespace spqr {

// Order-2 M-spline density basis on [0,1] and its I-spline integrals.
//
// The K basis functions are piecewise-linear "hat" densities over K+2 knots:
// the boundary knots 0 and 1 are doubled and the K-2 interior knots are
// equally spaced at j/(K-1). M_1 is the decreasing half-hat on [0, h], M_K the
// increasing half-hat on [1-h, 1], and each interior M_k a full hat of width
// 2h, with h = 1/(K-1). Each M_k integrates to one, so any convex combination
// is a density on [0,1]. The I-splines are the running integrals of the M_k and
// are evaluated in closed form (piecewise quadratic).
//
// Evaluation is right-continuous at interior knots; y = 1 takes the left
// limit, so M_K(1) = 2/h.
//
// Immutable after construction.
class SplineBasis {
 public:
  static constexpr int kMinBasis = 5;

  // The two basis functions that can be nonzero (M) or non-constant (I) on one
  // knot interval. `first` is index `interval` (decreasing side of its hat),
  // `second` is index `interval + 1` (increasing side).
  struct Local {
    int interval = 0;
    double first = 0.0;
    double second = 0.0;
  };

  // Throws ValidationError when num_basis < kMinBasis.
  explicit SplineBasis(int num_basis);

  int size() const { return num_basis_; }
  double spacing() const { return spacing_; }
  // The K+2 knots, boundary knots repeated.
  const std::vector<double>& knots() const { return knots_; }
  // The K distinct knots 0, h, ..., 1.
  double distinct_knot(int j) const { return knots_[j + 1]; }

  // (M_1(y), ..., M_K(y)). Throws DomainError outside [0,1].
  Eigen::VectorXd eval_m(double y) const;
  // (I_1(y), ..., I_K(y)). Throws DomainError outside [0,1].
  Eigen::VectorXd eval_i(double y) const;

  // Knot interval j in [0, K-2] with distinct_knot(j) <= y < distinct_knot(j+1)
  // (the last interval is closed on the right).
  int interval_of(double y) const;
  Local local_m(double y) const;
  Local local_i(double y) const;

  // Single basis function values, 0-based index k.
  double m_value(int k, double y) const;
  double i_value(int k, double y) const;

 private:
  void check_domain(double y) const;
  void support(int k, double& a, double& b, double& c) const;

  int num_basis_;
  double spacing_;
  std::vector<double> knots_;
};

// Row i holds eval_m(y[i]); only two entries per row are nonzero.
Eigen::MatrixXd basis_matrix(const SplineBasis& basis, const Eigen::VectorXd& y);

}  // namespace spqr

#endif  // SPQR_BASIS_H_
