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

#include "spqr/interpret.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "spqr/errors.h"

namespace spqr {
namespace {

void check_index(const Eigen::MatrixXd& x, int j) {
  if (j < 0 || j >= x.cols()) {
    std::ostringstream msg;
    msg << "covariate index " << j + 1 << " outside 1.." << x.cols();
    throw ValidationError(msg.str());
  }
}

void check_tau(const std::vector<double>& tau) {
  if (tau.empty()) throw ValidationError("no quantile levels given");
  for (double t : tau) {
    if (!(t > 0.0 && t < 1.0)) {
      std::ostringstream msg;
      msg << "quantile level " << t << " outside (0,1)";
      throw DomainError(msg.str());
    }
  }
}

void check_predictions(const Eigen::MatrixXd& q, Eigen::Index rows, size_t cols) {
  if (q.rows() != rows || q.cols() != static_cast<Eigen::Index>(cols)) {
    throw ValidationError("quantile function returned a matrix of the wrong shape");
  }
}

// The lower/upper edge designs of a main effect.
struct MainLayout {
  std::vector<double> edges;
  std::vector<int> bins;
  std::vector<double> counts;
  Eigen::MatrixXd lower;
  Eigen::MatrixXd upper;
};

MainLayout main_layout(const Eigen::MatrixXd& x, int j, int n_bins) {
  MainLayout m;
  m.edges = ale_edges(x.col(j), n_bins);
  m.bins = ale_bins(x.col(j), m.edges);
  const int num_bins = static_cast<int>(m.edges.size()) - 1;
  m.counts.assign(std::max(num_bins, 0), 0.0);
  m.lower = x;
  m.upper = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int b = m.bins[i];
    if (num_bins > 0) {
      m.counts[b] += 1.0;
      m.lower(i, j) = m.edges[b];
      m.upper(i, j) = m.edges[b + 1];
    }
  }
  return m;
}

// Accumulated, centered effect from the edge predictions.
Eigen::MatrixXd accumulate_main(const MainLayout& m, const Eigen::MatrixXd& q_lo,
                                const Eigen::MatrixXd& q_hi) {
  const Eigen::Index num_tau = q_lo.cols();
  const int num_bins = static_cast<int>(m.counts.size());
  Eigen::MatrixXd ale = Eigen::MatrixXd::Zero(num_bins + 1, num_tau);
  if (num_bins == 0) return ale;
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(num_bins, num_tau);
  for (Eigen::Index i = 0; i < q_lo.rows(); ++i) {
    delta.row(m.bins[i]) += q_hi.row(i) - q_lo.row(i);
  }
  double total = 0.0;
  for (int b = 0; b < num_bins; ++b) {
    delta.row(b) /= m.counts[b];
    ale.row(b + 1) = ale.row(b) + delta.row(b);
    total += m.counts[b];
  }
  Eigen::RowVectorXd center = Eigen::RowVectorXd::Zero(num_tau);
  for (int b = 0; b < num_bins; ++b) {
    center += m.counts[b] * 0.5 * (ale.row(b) + ale.row(b + 1));
  }
  ale.rowwise() -= center / total;
  return ale;
}

void require_bayesian(const FittedModel& model, const std::string& what) {
  if (!model.is_bayesian()) {
    throw CapabilityError(what + " requires an MCMC fit; this model was fitted by " +
                          to_string(model.method));
  }
}

QuantileFn model_quantiles(const FittedModel& model, int sample) {
  return [&model, sample](const Eigen::MatrixXd& x, const std::vector<double>& taus) {
    return predict_quantiles(model, x, taus, sample);
  };
}

double log_mean_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().mean());
}

void band(const std::vector<Eigen::MatrixXd>& draws, double level,
          Eigen::MatrixXd& lower, Eigen::MatrixXd& upper) {
  const double alpha = 0.5 * (1.0 - level);
  lower.resize(draws.front().rows(), draws.front().cols());
  upper.resize(lower.rows(), lower.cols());
  std::vector<double> values(draws.size());
  for (Eigen::Index r = 0; r < lower.rows(); ++r) {
    for (Eigen::Index c = 0; c < lower.cols(); ++c) {
      for (size_t s = 0; s < draws.size(); ++s) values[s] = draws[s](r, c);
      std::sort(values.begin(), values.end());
      lower(r, c) = empirical_quantile(values, alpha);
      upper(r, c) = empirical_quantile(values, 1.0 - alpha);
    }
  }
}

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("ci_level must lie in (0,1)");
}

}  // namespace

std::vector<double> ale_edges(const Eigen::VectorXd& x, int n_bins) {
  if (n_bins < 1) throw ValidationError("n_bins must be at least 1");
  if (x.size() == 0) throw ValidationError("no observations");
  std::vector<double> sorted(x.data(), x.data() + x.size());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<double> edges{sorted.front()};
  for (int k = 1; k <= n_bins; ++k) {
    const double p = static_cast<double>(k) / n_bins;
    auto idx = static_cast<size_t>(std::ceil(n * p - 1e-9));
    idx = std::clamp<size_t>(idx, 1, sorted.size());
    const double q = sorted[idx - 1];
    if (q > edges.back()) edges.push_back(q);
  }
  return edges;
}

std::vector<int> ale_bins(const Eigen::VectorXd& x, const std::vector<double>& edges) {
  std::vector<int> bins(x.size(), 0);
  const int num_bins = static_cast<int>(edges.size()) - 1;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const auto it = std::lower_bound(edges.begin(), edges.end(), x[i]);
    const int b = static_cast<int>(it - edges.begin()) - 1;
    bins[i] = std::clamp(b, 0, std::max(num_bins - 1, 0));
  }
  return bins;
}

ALEResult qale_main(const QuantileFn& predict, const Eigen::MatrixXd& x, int j,
                    const std::vector<double>& tau, int n_bins) {
  check_index(x, j);
  check_tau(tau);
  const MainLayout m = main_layout(x, j, n_bins);
  const Eigen::MatrixXd q_lo = predict(m.lower, tau);
  const Eigen::MatrixXd q_hi = predict(m.upper, tau);
  check_predictions(q_lo, x.rows(), tau.size());
  check_predictions(q_hi, x.rows(), tau.size());
  ALEResult r;
  r.var_index = {j};
  r.bin_edges = {m.edges};
  r.tau = tau;
  r.counts = m.counts;
  r.ale = accumulate_main(m, q_lo, q_hi);
  return r;
}

ALEResult qale_interaction(const QuantileFn& predict, const Eigen::MatrixXd& x,
                           int j, int l, const std::vector<double>& tau,
                           int n_bins) {
  check_index(x, j);
  check_index(x, l);
  if (j == l) throw ValidationError("interaction needs two different covariates");
  check_tau(tau);
  const std::vector<double> z1 = ale_edges(x.col(j), n_bins);
  const std::vector<double> z2 = ale_edges(x.col(l), n_bins);
  const int k1 = static_cast<int>(z1.size()) - 1;
  const int k2 = static_cast<int>(z2.size()) - 1;
  if (k1 < 1 || k2 < 1) {
    throw ValidationError("interaction needs non-constant covariates");
  }
  const std::vector<int> a1 = ale_bins(x.col(j), z1);
  const std::vector<int> a2 = ale_bins(x.col(l), z2);
  const Eigen::Index n = x.rows();

  Eigen::MatrixXd x11 = x, x12 = x, x21 = x, x22 = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    x11(i, j) = z1[a1[i]];
    x11(i, l) = z2[a2[i]];
    x12(i, j) = z1[a1[i]];
    x12(i, l) = z2[a2[i] + 1];
    x21(i, j) = z1[a1[i] + 1];
    x21(i, l) = z2[a2[i]];
    x22(i, j) = z1[a1[i] + 1];
    x22(i, l) = z2[a2[i] + 1];
  }
  const Eigen::MatrixXd y11 = predict(x11, tau);
  const Eigen::MatrixXd y12 = predict(x12, tau);
  const Eigen::MatrixXd y21 = predict(x21, tau);
  const Eigen::MatrixXd y22 = predict(x22, tau);
  for (const auto* q : {&y11, &y12, &y21, &y22}) check_predictions(*q, n, tau.size());

  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(k1, k2);
  for (Eigen::Index i = 0; i < n; ++i) counts(a1[i], a2[i]) += 1.0;

  // Nearest non-empty cell (in range-normalized midpoint coordinates) for
  // every empty cell.
  std::vector<std::pair<int, int>> filled;
  for (int a = 0; a < k1; ++a) {
    for (int b = 0; b < k2; ++b) {
      if (counts(a, b) > 0.0) filled.emplace_back(a, b);
    }
  }
  const double range1 = z1.back() - z1.front();
  const double range2 = z2.back() - z2.front();
  auto mid1 = [&](int a) { return 0.5 * (z1[a] + z1[a + 1]) / range1; };
  auto mid2 = [&](int b) { return 0.5 * (z2[b] + z2[b + 1]) / range2; };
  Eigen::MatrixXi source_a(k1, k2), source_b(k1, k2);
  for (int a = 0; a < k1; ++a) {
    for (int b = 0; b < k2; ++b) {
      source_a(a, b) = a;
      source_b(a, b) = b;
      if (counts(a, b) > 0.0) continue;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& [fa, fb] : filled) {
        const double d = std::pow(mid1(a) - mid1(fa), 2) + std::pow(mid2(b) - mid2(fb), 2);
        if (d < best) {
          best = d;
          source_a(a, b) = fa;
          source_b(a, b) = fb;
        }
      }
    }
  }

  ALEResult r;
  r.var_index = {j, l};
  r.bin_edges = {z1, z2};
  r.tau = tau;
  r.cell_counts = counts;
  const Eigen::VectorXd row_counts = counts.rowwise().sum();
  const Eigen::RowVectorXd col_counts = counts.colwise().sum();
  const double total = counts.sum();

  for (size_t t = 0; t < tau.size(); ++t) {
    const auto tt = static_cast<Eigen::Index>(t);
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(k1, k2);
    for (Eigen::Index i = 0; i < n; ++i) {
      delta(a1[i], a2[i]) +=
          (y22(i, tt) - y21(i, tt)) - (y12(i, tt) - y11(i, tt));
    }
    Eigen::MatrixXd mean_delta(k1, k2);
    for (int a = 0; a < k1; ++a) {
      for (int b = 0; b < k2; ++b) {
        const int sa = source_a(a, b);
        const int sb = source_b(a, b);
        mean_delta(a, b) = delta(sa, sb) / counts(sa, sb);
      }
    }
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(k1 + 1, k2 + 1);
    for (int a = 0; a < k1; ++a) {
      for (int b = 0; b < k2; ++b) {
        f(a + 1, b + 1) = mean_delta(a, b) + f(a, b + 1) + f(a + 1, b) - f(a, b);
      }
    }
    // Remove the main effect of x_j.
    Eigen::VectorXd f1 = Eigen::VectorXd::Zero(k1 + 1);
    for (int a = 0; a < k1; ++a) {
      double s = 0.0;
      for (int b = 0; b < k2; ++b) {
        const double d0 = f(a + 1, b) - f(a, b);
        const double d1 = f(a + 1, b + 1) - f(a, b + 1);
        s += counts(a, b) * 0.5 * (d0 + d1);
      }
      f1[a + 1] = f1[a] + s / row_counts[a];
    }
    // And of x_l.
    Eigen::VectorXd f2 = Eigen::VectorXd::Zero(k2 + 1);
    for (int b = 0; b < k2; ++b) {
      double s = 0.0;
      for (int a = 0; a < k1; ++a) {
        const double d0 = f(a, b + 1) - f(a, b);
        const double d1 = f(a + 1, b + 1) - f(a + 1, b);
        s += counts(a, b) * 0.5 * (d0 + d1);
      }
      f2[b + 1] = f2[b] + s / col_counts[b];
    }
    f.colwise() -= f1;
    f.rowwise() -= f2.transpose();
    double grand = 0.0;
    for (int a = 0; a < k1; ++a) {
      for (int b = 0; b < k2; ++b) {
        grand += counts(a, b) *
                 (f(a, b) + f(a, b + 1) + f(a + 1, b) + f(a + 1, b + 1)) / 4.0;
      }
    }
    f.array() -= grand / total;
    r.surface.push_back(std::move(f));
  }
  return r;
}

ALEResult qale(const FittedModel& model, const Eigen::MatrixXd& x,
               const std::vector<int>& var_index, const std::vector<double>& tau,
               int n_bins, const ALEOptions& options) {
  const bool uncertainty = options.ci_level.has_value() || options.get_all;
  if (var_index.size() == 2) {
    if (uncertainty) {
      throw CapabilityError(
          "ci_level and get_all are only available for main effects");
    }
    return qale_interaction(model_quantiles(model, -1), x, var_index[0],
                            var_index[1], tau, n_bins);
  }
  if (var_index.size() != 1) {
    throw ValidationError("var_index must hold one or two covariate indices");
  }
  if (!uncertainty) return qale_main(model_quantiles(model, -1), x, var_index[0], tau, n_bins);

  if (options.ci_level.has_value()) {
    require_bayesian(model, "ci_level");
    check_level(*options.ci_level);
  }
  if (options.get_all) require_bayesian(model, "get_all");
  const int j = var_index[0];
  check_index(x, j);
  check_tau(tau);
  const MainLayout m = main_layout(x, j, n_bins);
  ALEResult r;
  r.var_index = {j};
  r.bin_edges = {m.edges};
  r.tau = tau;
  r.counts = m.counts;
  std::vector<Eigen::MatrixXd> draws;
  for (int s = 0; s < model.num_samples(); ++s) {
    draws.push_back(accumulate_main(m, predict_quantiles(model, m.lower, tau, s),
                                    predict_quantiles(model, m.upper, tau, s)));
  }
  r.ale = Eigen::MatrixXd::Zero(draws.front().rows(), draws.front().cols());
  for (const auto& d : draws) r.ale += d;
  r.ale /= static_cast<double>(draws.size());
  if (options.ci_level.has_value()) {
    r.lower.emplace();
    r.upper.emplace();
    band(draws, *options.ci_level, *r.lower, *r.upper);
  }
  if (options.get_all) r.samples = std::move(draws);
  return r;
}

Eigen::MatrixXd ale_bin_means(const ALEResult& result) {
  const Eigen::Index bins = result.ale.rows() - 1;
  if (bins < 1) return Eigen::MatrixXd::Zero(0, result.ale.cols());
  return 0.5 * (result.ale.topRows(bins) + result.ale.bottomRows(bins));
}

std::string to_string(ImportanceKind kind) {
  return kind == ImportanceKind::kSD ? "sd" : "range";
}

ImportanceKind importance_kind(const Eigen::VectorXd& x) {
  std::set<double> levels;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    levels.insert(x[i]);
    if (static_cast<int>(levels.size()) > kDiscreteLevels) return ImportanceKind::kSD;
  }
  return ImportanceKind::kRange;
}

double ale_importance(const ALEResult& main, int tau_index, ImportanceKind kind) {
  if (main.ale.rows() < 2) return 0.0;
  if (kind == ImportanceKind::kRange) {
    const auto col = main.ale.col(tau_index);
    return col.maxCoeff() - col.minCoeff();
  }
  const Eigen::MatrixXd means = ale_bin_means(main);
  double total = 0.0, weighted = 0.0, squares = 0.0;
  for (Eigen::Index b = 0; b < means.rows(); ++b) {
    total += main.counts[b];
    weighted += main.counts[b] * means(b, tau_index);
  }
  const double mean = weighted / total;
  for (Eigen::Index b = 0; b < means.rows(); ++b) {
    squares += main.counts[b] * std::pow(means(b, tau_index) - mean, 2);
  }
  return std::sqrt(squares / total);
}

ImportanceResult qvi(const QuantileFn& predict, const Eigen::MatrixXd& x,
                     const std::vector<int>& var_index,
                     const std::vector<double>& tau, int n_bins) {
  ImportanceResult r;
  r.var_index = var_index;
  r.tau = tau;
  r.vi.resize(static_cast<Eigen::Index>(var_index.size()),
              static_cast<Eigen::Index>(tau.size()));
  for (size_t v = 0; v < var_index.size(); ++v) {
    const ALEResult main = qale_main(predict, x, var_index[v], tau, n_bins);
    const ImportanceKind kind = importance_kind(x.col(var_index[v]));
    r.kind.push_back(kind);
    for (size_t t = 0; t < tau.size(); ++t) {
      r.vi(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(t)) =
          ale_importance(main, static_cast<int>(t), kind);
    }
  }
  return r;
}

ImportanceResult qvi(const FittedModel& model, const Eigen::MatrixXd& x,
                     std::vector<int> var_index, const std::vector<double>& tau,
                     int n_bins, std::optional<double> ci_level) {
  if (var_index.empty()) {
    for (int j = 0; j < x.cols(); ++j) var_index.push_back(j);
  }
  if (!ci_level.has_value()) {
    return qvi(model_quantiles(model, -1), x, var_index, tau, n_bins);
  }
  require_bayesian(model, "ci_level");
  check_level(*ci_level);
  check_tau(tau);
  ImportanceResult r;
  r.var_index = var_index;
  r.tau = tau;
  const auto nv = static_cast<Eigen::Index>(var_index.size());
  const auto nt = static_cast<Eigen::Index>(tau.size());
  std::vector<Eigen::MatrixXd> draws(model.num_samples(), Eigen::MatrixXd(nv, nt));
  for (Eigen::Index v = 0; v < nv; ++v) {
    const int j = var_index[v];
    check_index(x, j);
    const ImportanceKind kind = importance_kind(x.col(j));
    r.kind.push_back(kind);
    const MainLayout m = main_layout(x, j, n_bins);
    ALEResult main;
    main.counts = m.counts;
    for (int s = 0; s < model.num_samples(); ++s) {
      main.ale = accumulate_main(m, predict_quantiles(model, m.lower, tau, s),
                                 predict_quantiles(model, m.upper, tau, s));
      for (Eigen::Index t = 0; t < nt; ++t) {
        draws[s](v, t) = ale_importance(main, static_cast<int>(t), kind);
      }
    }
  }
  r.vi = Eigen::MatrixXd::Zero(nv, nt);
  for (const auto& d : draws) r.vi += d;
  r.vi /= static_cast<double>(draws.size());
  r.lower.emplace();
  r.upper.emplace();
  band(draws, *ci_level, *r.lower, *r.upper);
  return r;
}

PitResult pit(const FittedModel& model, const Eigen::MatrixXd& x,
              const Eigen::VectorXd& y, bool get_all) {
  if (get_all) require_bayesian(model, "get_all");
  PitResult r;
  r.u = predict_cdf_pointwise(model, x, y);
  const Eigen::Index n = r.u.size();
  auto sorted = [](Eigen::VectorXd v) {
    std::sort(v.data(), v.data() + v.size());
    return v;
  };
  r.sorted_u = sorted(r.u);
  r.uniform.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r.uniform[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  }
  if (get_all) {
    for (int s = 0; s < model.num_samples(); ++s) {
      r.sample_sorted_u.push_back(sorted(predict_cdf_pointwise(model, x, y, s)));
    }
  }
  return r;
}

double ks_distance(const Eigen::VectorXd& u) {
  if (u.size() == 0) throw ValidationError("KS distance of an empty sample");
  Eigen::VectorXd s = u;
  std::sort(s.data(), s.data() + s.size());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double v = std::clamp(s[i], 0.0, 1.0);
    d = std::max({d, (i + 1) / n - v, v - i / n});
  }
  return d;
}

WaicResult waic(const Eigen::MatrixXd& loglik) {
  if (loglik.rows() < 2) {
    throw ValidationError("WAIC needs at least 2 posterior draws, got " +
                          std::to_string(loglik.rows()));
  }
  WaicResult r;
  r.pointwise.resize(loglik.cols());
  const double s = static_cast<double>(loglik.rows());
  for (Eigen::Index i = 0; i < loglik.cols(); ++i) {
    const Eigen::VectorXd l = loglik.col(i);
    const double lpd = log_mean_exp(l);
    const double var = (l.array() - l.mean()).square().sum() / (s - 1.0);
    r.lpd += lpd;
    r.penalty += var;
    r.pointwise[i] = lpd - var;
  }
  r.elpd = r.lpd - r.penalty;
  return r;
}

LooResult loo_is(const Eigen::MatrixXd& loglik) {
  if (loglik.rows() < 2) {
    throw ValidationError("LOO needs at least 2 posterior draws, got " +
                          std::to_string(loglik.rows()));
  }
  LooResult r;
  r.pointwise.resize(loglik.cols());
  for (Eigen::Index i = 0; i < loglik.cols(); ++i) {
    const Eigen::VectorXd neg = -loglik.col(i);
    r.pointwise[i] = -log_mean_exp(neg);
  }
  r.elpd = r.pointwise.sum();
  return r;
}

Eigen::MatrixXd pointwise_loglik(const FittedModel& model, const Dataset& data) {
  const Likelihood lik(model.shape, data, model.basis);
  Eigen::MatrixXd out(model.num_samples(), data.size());
  for (int s = 0; s < model.num_samples(); ++s) {
    out.row(s) = lik.pointwise(model.weights[s]).transpose();
  }
  return out;
}

}  // namespace spqr
