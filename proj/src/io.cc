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

#include "spqr/io.h"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "spqr/errors.h"

namespace spqr {
namespace {

using nlohmann::json;

// Splits CSV text into records of fields.
std::vector<std::vector<std::string>> split_records(const std::string& text,
                                                    const std::string& source) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
  size_t line = 1;
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        any = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any || !field.empty()) {
          record.push_back(std::move(field));
          records.push_back(std::move(record));
        }
        record.clear();
        field.clear();
        any = false;
        ++line;
        break;
      default:
        field.push_back(c);
        any = true;
    }
  }
  if (quoted) {
    throw ValidationError(source + ": unterminated quoted field near line " +
                          std::to_string(line));
  }
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

std::string trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

bool parse_number(const std::string& cell, double& value) {
  const std::string t = trim(cell);
  if (t.empty()) return false;
  errno = 0;
  char* end = nullptr;
  value = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && errno != ERANGE && std::isfinite(value);
}

void check_keys(const json& section, const std::string& name,
                const std::set<std::string>& allowed) {
  if (!section.is_object()) {
    throw ValidationError("config section '" + name + "' must be an object");
  }
  for (const auto& item : section.items()) {
    if (!allowed.count(item.key())) {
      throw ValidationError("unknown config key '" + name + "." + item.key() + "'");
    }
  }
}

template <typename T>
void read(const json& section, const char* key, T& out) {
  if (section.contains(key)) out = section.at(key).get<T>();
}

}  // namespace

int Table::find(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

Table parse_csv(std::istream& in, const std::string& source) {
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const auto records = split_records(buffer.str(), source);
  if (records.empty()) throw ValidationError(source + ": missing header row");
  Table t;
  for (const std::string& h : records.front()) t.header.push_back(trim(h));
  const size_t cols = t.header.size();
  const size_t rows = records.size() - 1;
  if (rows == 0) throw ValidationError(source + ": no data rows");
  t.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (size_t r = 0; r < rows; ++r) {
    const auto& rec = records[r + 1];
    if (rec.size() != cols) {
      std::ostringstream msg;
      msg << source << ": row " << r + 1 << " has " << rec.size()
          << " fields, expected " << cols;
      throw ValidationError(msg.str());
    }
    for (size_t c = 0; c < cols; ++c) {
      double v = 0.0;
      if (!parse_number(rec[c], v)) {
        std::ostringstream msg;
        msg << source << ": row " << r + 1 << ", column '" << t.header[c] << "': ";
        if (trim(rec[c]).empty()) {
          msg << "missing value";
        } else {
          msg << "'" << rec[c] << "' is not a finite number";
        }
        throw ValidationError(msg.str());
      }
      t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return t;
}

Table read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return parse_csv(in, path);
}

void write_csv(std::ostream& out, const Table& table) {
  for (size_t c = 0; c < table.header.size(); ++c) {
    out << (c ? "," : "") << table.header[c];
  }
  out << '\n';
  std::ostringstream row;
  row.precision(17);
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    row.str("");
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      row << (c ? "," : "") << table.values(r, c);
    }
    out << row.str() << '\n';
  }
}

Dataset split_response(const Table& table, const std::string& response) {
  const int col = table.find(response);
  if (col < 0) {
    throw ValidationError("response column '" + response + "' not found");
  }
  if (table.header.size() < 2) {
    throw ValidationError("need at least one covariate column besides the response");
  }
  Dataset d;
  d.y = table.values.col(col);
  d.x.resize(table.values.rows(), table.values.cols() - 1);
  for (Eigen::Index c = 0, k = 0; c < table.values.cols(); ++c) {
    if (c != col) d.x.col(k++) = table.values.col(c);
  }
  return d;
}

RunConfig parse_config(const std::string& text, const std::string& source) {
  RunConfig cfg;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(source + ": " + e.what());
  }
  try {
    check_keys(root, "<root>", {"model", "prior", "train", "mcmc", "io"});
    if (root.contains("model")) {
      const json& m = root["model"];
      check_keys(m, "model", {"n_knots", "hidden", "activation", "method",
                              "normalize", "seed"});
      read(m, "n_knots", cfg.n_knots);
      read(m, "hidden", cfg.shape.hidden);
      if (m.contains("activation")) {
        cfg.shape.activation = parse_activation(m["activation"].get<std::string>());
      }
      if (m.contains("method")) cfg.method = parse_method(m["method"].get<std::string>());
      read(m, "normalize", cfg.normalize);
      if (m.contains("seed") && !m["seed"].is_null()) {
        cfg.seed = m["seed"].get<std::uint64_t>();
      }
    }
    if (root.contains("prior")) {
      const json& p = root["prior"];
      check_keys(p, "prior", {"kind", "a_lambda", "b_lambda", "a_sigma", "b_sigma"});
      if (p.contains("kind")) cfg.prior.kind = parse_prior(p["kind"].get<std::string>());
      read(p, "a_lambda", cfg.prior.a_lambda);
      read(p, "b_lambda", cfg.prior.b_lambda);
      read(p, "a_sigma", cfg.prior.a_sigma);
      read(p, "b_sigma", cfg.prior.b_sigma);
    }
    if (root.contains("train")) {
      const json& t = root["train"];
      check_keys(t, "train", {"lr", "batch_size", "epochs", "valid_pct",
                              "early_stopping_epochs", "dropout", "batchnorm",
                              "print_every", "checkpoint_path"});
      read(t, "lr", cfg.train.lr);
      read(t, "batch_size", cfg.train.batch_size);
      read(t, "epochs", cfg.train.epochs);
      read(t, "valid_pct", cfg.train.valid_pct);
      read(t, "early_stopping_epochs", cfg.train.early_stopping_epochs);
      if (t.contains("dropout")) {
        const auto d = t["dropout"].get<std::vector<double>>();
        if (d.size() != 2) throw ValidationError("train.dropout must hold two rates");
        cfg.train.dropout_input = d[0];
        cfg.train.dropout_hidden = d[1];
      }
      read(t, "batchnorm", cfg.train.batchnorm);
      read(t, "print_every", cfg.train.print_every);
      read(t, "checkpoint_path", cfg.train.checkpoint_path);
    }
    if (root.contains("mcmc")) {
      const json& c = root["mcmc"];
      check_keys(c, "mcmc", {"algorithm", "iter", "warmup", "thin", "stepsize",
                             "metric", "delta", "max_treedepth", "int_time"});
      if (c.contains("algorithm")) {
        cfg.mcmc.algorithm = parse_algorithm(c["algorithm"].get<std::string>());
      }
      read(c, "iter", cfg.mcmc.iter);
      read(c, "warmup", cfg.mcmc.warmup);
      read(c, "thin", cfg.mcmc.thin);
      if (c.contains("stepsize") && !c["stepsize"].is_null()) {
        cfg.mcmc.stepsize = c["stepsize"].get<double>();
      }
      if (c.contains("metric")) cfg.mcmc.metric = parse_metric(c["metric"].get<std::string>());
      read(c, "delta", cfg.mcmc.delta);
      read(c, "max_treedepth", cfg.mcmc.max_treedepth);
      read(c, "int_time", cfg.mcmc.int_time);
    }
    if (root.contains("io")) {
      const json& io = root["io"];
      check_keys(io, "io", {"data", "response", "output"});
      read(io, "data", cfg.data_path);
      read(io, "response", cfg.response);
      read(io, "output", cfg.output_path);
    }
  } catch (const json::exception& e) {
    throw ValidationError(source + ": " + e.what());
  }
  if (cfg.n_knots < SplineBasis::kMinBasis) {
    throw ValidationError("n_knots must be at least " +
                          std::to_string(SplineBasis::kMinBasis));
  }
  cfg.prior.validate();
  cfg.train.validate();
  cfg.mcmc.validate();
  return cfg;
}

RunConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path);
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    if (!parse_number(item, v)) {
      throw ValidationError("'" + item + "' is not a number");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("empty number list");
  return out;
}

}  // namespace spqr
