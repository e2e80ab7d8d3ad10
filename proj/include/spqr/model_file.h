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

#ifndef SPQR_MODEL_FILE_H_
#define SPQR_MODEL_FILE_H_

#include <string>

#include "spqr/model.h"

namespace spqr {

// Model file layout:
//
//   SPQR-MODEL <version>\n
//   <one-line JSON header>\n
//   <payload: little-endian IEEE-754 doubles>
//
// The header holds the architecture, knots, method, prior, normalization,
// training log, seed and the payload length; the payload holds the flattened
// weight sets back to back. Wall-clock timings are not stored, so fitting
// twice with the same seed writes identical bytes.
inline constexpr int kModelFileVersion = 1;

std::string serialize_model(const FittedModel& model);
// Throws ValidationError on a malformed document or a version mismatch.
FittedModel deserialize_model(const std::string& bytes);

// Writes to a temporary file next to `path`, then renames it into place.
void save_model(const FittedModel& model, const std::string& path);
FittedModel load_model(const std::string& path);

// Atomic replace for any text or binary output.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace spqr

#endif  // SPQR_MODEL_FILE_H_
