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

#ifndef SPQR_IO_H_
#define SPQR_IO_H_

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spqr/model.h"
#include "spqr/sampler.h"
#include "spqr/trainer.h"

namespace spqr {

// A numeric CSV table with a header row.
struct Table {
  std::vector<std::string> header;
  Eigen::MatrixXd values;

  // Column position by name, or -1.
  int find(const std::string& name) const;
};

// RFC-4180 style: comma separated, optional double quotes, header required.
// Every cell must parse as a finite number; the first offending cell is
// reported by 1-based data row and column name.
Table parse_csv(std::istream& in, const std::string& source = "input");
Table read_csv(const std::string& path);
void write_csv(std::ostream& out, const Table& table);

// Splits a table into covariates and a response column.
Dataset split_response(const Table& table, const std::string& response);

// Fit configuration. Every section and key is optional; unknown keys are
// rejected.
//
// {
//   "model": {"n_knots": 10, "hidden": [10], "activation": "tanh",
//             "method": "MLE", "normalize": false, "seed": 1},
//   "prior": {"kind": "GP", "a_lambda": 0.001, "b_lambda": 0.001,
//             "a_sigma": 0.001, "b_sigma": 0.001},
//   "train": {"lr": 0.01, "batch_size": 128, "epochs": 200,
//             "valid_pct": 0.2, "early_stopping_epochs": 10,
//             "dropout": [0, 0], "batchnorm": false, "print_every": 10,
//             "checkpoint_path": ""},
//   "mcmc":  {"algorithm": "NUTS", "iter": 2000, "warmup": 500, "thin": 1,
//             "stepsize": null, "metric": "diag", "delta": 0.9,
//             "max_treedepth": 6, "int_time": 1},
//   "io":    {"data": "", "response": "Y", "output": ""}
// }
struct RunConfig {
  int n_knots = 10;
  NetworkShape shape;  // inputs are taken from the data
  Method method = Method::kMLE;
  bool normalize = false;
  std::optional<std::uint64_t> seed;
  PriorConfig prior;
  TrainControl train;
  MCMCControl mcmc;
  std::string data_path;
  std::string response = "Y";
  std::string output_path;

  RunConfig() { shape.hidden = {10}; }
};

RunConfig parse_config(const std::string& text, const std::string& source = "config");
RunConfig read_config(const std::string& path);

// Comma-separated numbers, e.g. "0.1,0.5,0.9".
std::vector<double> parse_number_list(const std::string& text);

}  // namespace spqr

#endif  // SPQR_IO_H_
