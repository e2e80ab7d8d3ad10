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

#include "spqr/priors.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "spqr/errors.h"

namespace spqr {

std::string to_string(PriorKind kind) {
  switch (kind) {
    case PriorKind::kGP:
      return "GP";
    case PriorKind::kARD:
      return "ARD";
    case PriorKind::kGSM:
      return "GSM";
  }
  return "?";
}

PriorKind parse_prior(const std::string& name) {
  if (name == "GP") return PriorKind::kGP;
  if (name == "ARD") return PriorKind::kARD;
  if (name == "GSM") return PriorKind::kGSM;
  throw ValidationError("unknown prior '" + name + "' (expected GP, ARD or GSM)");
}

void PriorConfig::validate() const {
  for (double v : {a_lambda, b_lambda, a_sigma, b_sigma}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError("prior hyperparameters must be positive and finite");
    }
  }
}

std::vector<FreeScale> free_scales(const std::vector<LayerDims>& dims,
                                   PriorKind kind) {
  std::vector<FreeScale> out;
  for (int l = 0; l < static_cast<int>(dims.size()); ++l) {
    const int units = dims[l].cols - 1;
    out.push_back({FreeScale::Kind::kLambda, l, {0}, 1.0});
    const bool unit_wise =
        kind == PriorKind::kGSM || (kind == PriorKind::kARD && l == 0);
    if (unit_wise) {
      for (int j = 1; j <= units; ++j) {
        out.push_back({FreeScale::Kind::kLambda, l, {j}, 1.0});
      }
    } else {
      FreeScale shared{FreeScale::Kind::kLambda, l, {}, 1.0};
      for (int j = 1; j <= units; ++j) shared.columns.push_back(j);
      if (l > 0) shared.divisor = units;
      out.push_back(std::move(shared));
    }
    if (kind == PriorKind::kGSM) {
      out.push_back({FreeScale::Kind::kSigma, l, {}, 1.0});
    }
  }
  return out;
}

ScaleState scales_from_free(const std::vector<LayerDims>& dims,
                            const std::vector<FreeScale>& layout,
                            const std::vector<double>& values) {
  if (values.size() != layout.size()) {
    throw ValidationError("free scale vector has the wrong length");
  }
  ScaleState s;
  s.sigma2.assign(dims.size(), 1.0);
  for (const LayerDims& d : dims) s.lambda2.push_back(Eigen::VectorXd::Ones(d.cols));
  for (size_t i = 0; i < layout.size(); ++i) {
    const FreeScale& f = layout[i];
    if (f.kind == FreeScale::Kind::kSigma) {
      s.sigma2[f.layer] = values[i];
    } else {
      for (int j : f.columns) s.lambda2[f.layer][j] = values[i] / f.divisor;
    }
  }
  return s;
}

ScaleState initial_scales(const std::vector<LayerDims>& dims, PriorKind kind) {
  const auto layout = free_scales(dims, kind);
  return scales_from_free(dims, layout, std::vector<double>(layout.size(), 1.0));
}

std::vector<double> free_values(const std::vector<FreeScale>& layout,
                                const ScaleState& scales) {
  std::vector<double> out;
  out.reserve(layout.size());
  for (const FreeScale& f : layout) {
    if (f.kind == FreeScale::Kind::kSigma) {
      out.push_back(scales.sigma2[f.layer]);
    } else {
      out.push_back(scales.lambda2[f.layer][f.columns.front()] * f.divisor);
    }
  }
  return out;
}

void check_scales(const std::vector<LayerDims>& dims, const ScaleState& scales,
                  PriorKind kind) {
  if (scales.sigma2.size() != dims.size() ||
      scales.lambda2.size() != dims.size()) {
    throw ValidationError("scale state does not match network depth");
  }
  for (size_t l = 0; l < dims.size(); ++l) {
    if (scales.lambda2[l].size() != dims[l].cols) {
      throw ValidationError("scale state does not match layer width");
    }
    if (!(scales.sigma2[l] > 0.0) || !(scales.lambda2[l].minCoeff() > 0.0)) {
      throw DomainError("prior scales must be positive");
    }
    if (kind != PriorKind::kGSM && scales.sigma2[l] != 1.0) {
      throw ValidationError("GP and ARD priors fix the layer scale at 1");
    }
  }
  for (const FreeScale& f : free_scales(dims, kind)) {
    if (f.kind == FreeScale::Kind::kSigma) continue;
    const double v = scales.lambda2[f.layer][f.columns.front()];
    for (int j : f.columns) {
      if (scales.lambda2[f.layer][j] != v) {
        throw ValidationError("scale state breaks the " + to_string(kind) +
                              " sharing pattern");
      }
    }
  }
}

double log_inverse_gamma(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) -
         (shape + 1.0) * std::log(x) - scale / x;
}

double log_prior(const WeightSet& w, const ScaleState& scales,
                 const PriorConfig& cfg) {
  cfg.validate();
  check_scales(w.dims(), scales, cfg.kind);
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  for (int l = 0; l < w.num_layers(); ++l) {
    const auto m = w.layer(l);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double var = scales.sigma2[l] * scales.lambda2[l][j];
      const double ss = m.col(j).squaredNorm();
      total += -0.5 * m.rows() * (log_2pi + std::log(var)) - 0.5 * ss / var;
    }
  }
  const auto layout = free_scales(w.dims(), cfg.kind);
  const auto values = free_values(layout, scales);
  for (size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].kind == FreeScale::Kind::kSigma) {
      total += log_inverse_gamma(values[i], cfg.a_sigma, cfg.b_sigma);
    } else {
      total += log_inverse_gamma(values[i], cfg.a_lambda, cfg.b_lambda);
    }
  }
  return total;
}

WeightSet grad_log_prior(const WeightSet& w, const ScaleState& scales,
                         const PriorConfig& cfg) {
  cfg.validate();
  check_scales(w.dims(), scales, cfg.kind);
  WeightSet g = w;
  for (int l = 0; l < w.num_layers(); ++l) {
    auto m = g.layer(l);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m.col(j) *= -1.0 / (scales.sigma2[l] * scales.lambda2[l][j]);
    }
  }
  return g;
}

double draw_inverse_gamma(double shape, double scale, Rng& rng) {
  std::gamma_distribution<double> gamma(shape, 1.0);
  return scale / gamma(rng);
}

ScaleState gibbs_update_scales(const WeightSet& w, const ScaleState& scales,
                               const PriorConfig& cfg, Rng& rng) {
  cfg.validate();
  check_scales(w.dims(), scales, cfg.kind);
  ScaleState out = scales;
  for (const FreeScale& f : free_scales(w.dims(), cfg.kind)) {
    const auto m = w.layer(f.layer);
    if (f.kind == FreeScale::Kind::kLambda) {
      double ss = 0.0;
      for (int j : f.columns) ss += m.col(j).squaredNorm();
      const double count = static_cast<double>(m.rows()) * f.columns.size();
      const double value = draw_inverse_gamma(
          cfg.a_lambda + 0.5 * count,
          cfg.b_lambda + f.divisor * ss / (2.0 * out.sigma2[f.layer]), rng);
      for (int j : f.columns) out.lambda2[f.layer][j] = value / f.divisor;
    } else {
      double ss = 0.0;
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        ss += m.col(j).squaredNorm() / out.lambda2[f.layer][j];
      }
      const double count = static_cast<double>(m.size());
      out.sigma2[f.layer] = draw_inverse_gamma(cfg.a_sigma + 0.5 * count,
                                               cfg.b_sigma + 0.5 * ss, rng);
    }
  }
  return out;
}

WeightSet reparam_to_weights(const StandardizedWeights& z,
                             const ScaleState& scales) {
  WeightSet w = z;
  for (int l = 0; l < w.num_layers(); ++l) {
    auto m = w.layer(l);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m.col(j) *= std::sqrt(scales.sigma2[l]) * std::sqrt(scales.lambda2[l][j]);
    }
  }
  return w;
}

StandardizedWeights weights_to_standardized(const WeightSet& w,
                                            const ScaleState& scales) {
  StandardizedWeights z = w;
  for (int l = 0; l < z.num_layers(); ++l) {
    auto m = z.layer(l);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m.col(j) /= std::sqrt(scales.sigma2[l]) * std::sqrt(scales.lambda2[l][j]);
    }
  }
  return z;
}

}  // namespace spqr
