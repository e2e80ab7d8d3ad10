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

#include "spqr/model_file.h"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "spqr/errors.h"

namespace spqr {
namespace {

using nlohmann::json;

constexpr char kMagic[] = "SPQR-MODEL";

json doubles_to_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) {
    if (std::isfinite(x)) {
      out.push_back(x);
    } else {
      out.push_back(nullptr);
    }
  }
  return out;
}

std::vector<double> doubles_from_json(const json& j) {
  std::vector<double> out;
  for (const json& x : j) {
    out.push_back(x.is_null() ? std::numeric_limits<double>::quiet_NaN()
                              : x.get<double>());
  }
  return out;
}

json vector_to_json(const Eigen::VectorXd& v) {
  return doubles_to_json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const json& j) {
  const std::vector<double> v = doubles_from_json(j);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json log_to_json(const TrainingLog& log) {
  return {
      {"learning_rate", log.learning_rate},
      {"batch_size", log.batch_size},
      {"train_loss", doubles_to_json(log.train_loss)},
      {"valid_loss", doubles_to_json(log.valid_loss)},
      {"best_epoch", log.best_epoch},
      {"algorithm", log.algorithm},
      {"target_accept", log.target_accept},
      {"step_size", log.step_size},
      {"iter_loglik", doubles_to_json(log.iter_loglik)},
      {"iter_accept", doubles_to_json(log.iter_accept)},
      {"iter_depth", log.iter_depth},
      {"iter_divergent", log.iter_divergent},
      {"warmup", log.warmup},
      {"thin", log.thin},
      {"divergences", log.divergences},
      {"mean_accept", log.mean_accept},
      {"sample_loglik", doubles_to_json(log.sample_loglik)},
  };
}

TrainingLog log_from_json(const json& j) {
  TrainingLog log;
  log.learning_rate = j.at("learning_rate").get<double>();
  log.batch_size = j.at("batch_size").get<int>();
  log.train_loss = doubles_from_json(j.at("train_loss"));
  log.valid_loss = doubles_from_json(j.at("valid_loss"));
  log.best_epoch = j.at("best_epoch").get<int>();
  log.algorithm = j.at("algorithm").get<std::string>();
  log.target_accept = j.at("target_accept").get<double>();
  log.step_size = j.at("step_size").get<double>();
  log.iter_loglik = doubles_from_json(j.at("iter_loglik"));
  log.iter_accept = doubles_from_json(j.at("iter_accept"));
  log.iter_depth = j.at("iter_depth").get<std::vector<int>>();
  log.iter_divergent = j.at("iter_divergent").get<std::vector<int>>();
  log.warmup = j.at("warmup").get<int>();
  log.thin = j.at("thin").get<int>();
  log.divergences = j.at("divergences").get<int>();
  log.mean_accept = j.at("mean_accept").get<double>();
  log.sample_loglik = doubles_from_json(j.at("sample_loglik"));
  return log;
}

void append_le(std::string& out, double value) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
  for (int b = 0; b < 8; ++b) {
    out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
  }
}

double read_le(const char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

std::string serialize_model(const FittedModel& model) {
  model.validate();
  json header;
  header["inputs"] = model.shape.inputs;
  header["hidden"] = model.shape.hidden;
  header["outputs"] = model.shape.outputs;
  header["activation"] = to_string(model.shape.activation);
  header["num_basis"] = model.basis.size();
  header["knots"] = model.basis.knots();
  header["method"] = to_string(model.method);
  if (model.prior.has_value()) {
    header["prior"] = {{"kind", to_string(model.prior->kind)},
                       {"a_lambda", model.prior->a_lambda},
                       {"b_lambda", model.prior->b_lambda},
                       {"a_sigma", model.prior->a_sigma},
                       {"b_sigma", model.prior->b_sigma}};
  } else {
    header["prior"] = nullptr;
  }
  const Normalization& n = model.normalization;
  header["normalization"] = {{"enabled", n.enabled},
                             {"x_min", vector_to_json(n.x_min)},
                             {"x_max", vector_to_json(n.x_max)},
                             {"y_min", n.y_min},
                             {"y_max", n.y_max}};
  header["log"] = log_to_json(model.log);
  header["seed"] = model.seed;
  header["num_samples"] = model.num_samples();
  header["weights_per_sample"] = model.weights.front().size();

  std::string out = std::string(kMagic) + " " +
                    std::to_string(kModelFileVersion) + "\n" + header.dump() +
                    "\n";
  out.reserve(out.size() + 8 * model.num_samples() * model.weights.front().size());
  for (const WeightSet& w : model.weights) {
    for (Eigen::Index i = 0; i < w.size(); ++i) append_le(out, w.flat()[i]);
  }
  return out;
}

FittedModel deserialize_model(const std::string& bytes) {
  const size_t line1 = bytes.find('\n');
  if (line1 == std::string::npos) throw ValidationError("model file is truncated");
  std::istringstream magic_line(bytes.substr(0, line1));
  std::string magic;
  int version = 0;
  magic_line >> magic >> version;
  if (magic != kMagic) throw ValidationError("not an SPQR model file");
  if (version != kModelFileVersion) {
    throw ValidationError("model file version " + std::to_string(version) +
                          " is not supported (expected " +
                          std::to_string(kModelFileVersion) + ")");
  }
  const size_t line2 = bytes.find('\n', line1 + 1);
  if (line2 == std::string::npos) throw ValidationError("model file is truncated");

  FittedModel model;
  try {
    const json header = json::parse(bytes.substr(line1 + 1, line2 - line1 - 1));
    model.shape.inputs = header.at("inputs").get<int>();
    model.shape.hidden = header.at("hidden").get<std::vector<int>>();
    model.shape.outputs = header.at("outputs").get<int>();
    model.shape.activation = parse_activation(header.at("activation").get<std::string>());
    model.basis = SplineBasis(header.at("num_basis").get<int>());
    if (header.at("knots").get<std::vector<double>>() != model.basis.knots()) {
      throw ValidationError("stored knots do not match the basis layout");
    }
    model.method = parse_method(header.at("method").get<std::string>());
    if (!header.at("prior").is_null()) {
      const json& p = header.at("prior");
      PriorConfig cfg;
      cfg.kind = parse_prior(p.at("kind").get<std::string>());
      cfg.a_lambda = p.at("a_lambda").get<double>();
      cfg.b_lambda = p.at("b_lambda").get<double>();
      cfg.a_sigma = p.at("a_sigma").get<double>();
      cfg.b_sigma = p.at("b_sigma").get<double>();
      model.prior = cfg;
    }
    const json& n = header.at("normalization");
    model.normalization.enabled = n.at("enabled").get<bool>();
    model.normalization.x_min = vector_from_json(n.at("x_min"));
    model.normalization.x_max = vector_from_json(n.at("x_max"));
    model.normalization.y_min = n.at("y_min").get<double>();
    model.normalization.y_max = n.at("y_max").get<double>();
    model.log = log_from_json(header.at("log"));
    model.seed = header.at("seed").get<std::uint64_t>();

    const int samples = header.at("num_samples").get<int>();
    const Eigen::Index per = header.at("weights_per_sample").get<Eigen::Index>();
    const size_t payload = bytes.size() - line2 - 1;
    if (samples < 1 || per < 1 ||
        payload != static_cast<size_t>(samples) * static_cast<size_t>(per) * 8) {
      throw ValidationError("model payload length does not match its header");
    }
    const char* p = bytes.data() + line2 + 1;
    for (int s = 0; s < samples; ++s) {
      Eigen::VectorXd flat(per);
      for (Eigen::Index i = 0; i < per; ++i, p += 8) flat[i] = read_le(p);
      model.weights.emplace_back(model.shape, std::move(flat));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed model header: ") + e.what());
  }
  model.validate();
  return model;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + tmp + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw ValidationError("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw ValidationError("cannot move model into '" + path + "'");
  }
}

void save_model(const FittedModel& model, const std::string& path) {
  write_file_atomic(path, serialize_model(model));
}

FittedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_model(buffer.str());
}

}  // namespace spqr
