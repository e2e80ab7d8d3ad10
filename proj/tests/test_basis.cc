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
#include "spqr/basis.h"
#include "spqr/errors.h"

namespace spqr {
namespace {

TEST(SplineBasis, KnotsAreEquallySpaced) {
  const SplineBasis ten(10);
  ASSERT_EQ(ten.knots().size(), 12u);
  for (int j = 1; j <= 8; ++j) EXPECT_NEAR(ten.distinct_knot(j), j / 9.0, 1e-15);
  EXPECT_EQ(ten.knots().front(), 0.0);
  EXPECT_EQ(ten.knots()[1], 0.0);
  EXPECT_EQ(ten.knots().back(), 1.0);
  const SplineBasis five(5);
  EXPECT_NEAR(five.distinct_knot(1), 0.25, 1e-15);
  EXPECT_NEAR(five.distinct_knot(2), 0.5, 1e-15);
  EXPECT_NEAR(five.distinct_knot(3), 0.75, 1e-15);
}

TEST(SplineBasis, RejectsTooFewFunctions) {
  EXPECT_THROW(SplineBasis(4), ValidationError);
}

TEST(SplineBasis, KnownValues) {
  const SplineBasis b(10);
  const Eigen::VectorXd m0 = b.eval_m(0.0);
  EXPECT_DOUBLE_EQ(m0[0], 18.0);
  EXPECT_DOUBLE_EQ(m0.tail(9).cwiseAbs().sum(), 0.0);
  for (int k = 1; k <= 8; ++k) {
    EXPECT_NEAR(b.eval_m(k / 9.0)[k], 9.0, 1e-12) << k;
  }
  EXPECT_NEAR(b.eval_i(1.0 / 18.0)[0], 0.75, 1e-14);
  EXPECT_EQ(b.eval_i(0.0).cwiseAbs().sum(), 0.0);
  EXPECT_TRUE(b.eval_i(1.0).isApprox(Eigen::VectorXd::Ones(10)));
  EXPECT_DOUBLE_EQ(b.eval_m(1.0)[9], 18.0);
}

TEST(SplineBasis, OutsideDomainThrows) {
  const SplineBasis b(6);
  EXPECT_THROW(b.eval_m(-0.01), DomainError);
  EXPECT_THROW(b.eval_i(1.01), DomainError);
  EXPECT_THROW(b.eval_m(std::nan("")), DomainError);
}

TEST(SplineBasis, MatchesRecursion) {
  for (int k = 5; k <= 25; ++k) {
    const SplineBasis b(k);
    for (int i = 0; i <= 1000; ++i) {
      const double y = i / 1000.0;
      const Eigen::VectorXd m = b.eval_m(y);
      for (int j = 0; j < k; ++j) {
        ASSERT_NEAR(m[j], testing::m_spline_recursive(b.knots(), j, 2, y), 1e-9)
            << "K=" << k << " j=" << j << " y=" << y;
      }
    }
  }
}

TEST(SplineBasis, DensitiesAndIntegrals) {
  for (int k = 5; k <= 25; ++k) {
    const SplineBasis b(k);
    std::vector<double> breaks(b.knots());
    for (int j = 0; j < k; ++j) {
      const auto mj = [&](double y) { return b.eval_m(y)[j]; };
      EXPECT_NEAR(testing::integrate(mj, 0.0, 1.0, breaks), 1.0, 1e-10);
    }
    // cumulative quadrature on a merged grid
    const std::vector<double> grid = testing::merged_grid(b, 1001);
    Eigen::VectorXd cum = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd prev_i = b.eval_i(0.0);
    for (size_t g = 1; g < grid.size(); ++g) {
      const double lo = grid[g - 1], hi = grid[g];
      // right limit at lo, left limit at hi
      for (int j = 0; j < k; ++j) {
        const auto mj = [&](double y) { return b.eval_m(y)[j]; };
        cum[j] += testing::integrate(mj, lo, hi, {}, 1);
      }
      const Eigen::VectorXd m = b.eval_m(hi);
      const Eigen::VectorXd i_hi = b.eval_i(hi);
      EXPECT_GE(m.minCoeff(), 0.0);
      EXPECT_LT((i_hi - cum).cwiseAbs().maxCoeff(), 1e-8) << "K=" << k << " y=" << hi;
      EXPECT_GE((i_hi - prev_i).minCoeff(), -1e-12);
      prev_i = i_hi;
    }
  }
}

TEST(SplineBasis, BasisMatrixRows) {
  const SplineBasis b(7);
  Eigen::VectorXd y(3);
  y << 0.0, 0.4, 1.0;
  const Eigen::MatrixXd m = basis_matrix(b, y);
  for (int i = 0; i < 3; ++i) {
    EXPECT_TRUE(m.row(i).transpose().isApprox(b.eval_m(y[i])));
  }
}

}  // namespace
}  // namespace spqr
