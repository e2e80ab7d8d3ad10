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

#ifndef SPQR_ERRORS_H_
#define SPQR_ERRORS_H_

#include <stdexcept>
#include <string>

namespace spqr {

// Bad input: out-of-range arguments, malformed files, shape mismatches.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value outside the domain of a mathematical function (e.g. y outside
// [0,1] for a spline evaluation).
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// The operation is not available for this kind of fitted model or option
// combination (e.g. credible bands on a point estimate).
class CapabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical breakdown: non-finite loss, all-divergent warmup, zero density.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spqr

#endif  // SPQR_ERRORS_H_
