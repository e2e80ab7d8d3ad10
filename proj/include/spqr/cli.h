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

#ifndef SPQR_CLI_H_
#define SPQR_CLI_H_

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spqr/model.h"

namespace spqr {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitCapability = 3;
inline constexpr int kExitNumerical = 4;

struct ElpdEstimate {
  double loo = 0.0;
  double waic = 0.0;
};

// The fit summary block: method, loss or acceptance ratio, elpd when given,
// elapsed minutes and optionally the layer table.
void print_summary(const FittedModel& model, std::ostream& out, bool show_model,
                   const std::optional<ElpdEstimate>& elpd = std::nullopt);

// Runs one command line (args exclude the program name). Tables go to `out`
// unless an output file is given; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace spqr

#endif  // SPQR_CLI_H_
