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

#include "spqr/sampler.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "spqr/errors.h"
#include "spqr/trainer.h"

namespace spqr {

std::string to_string(Algorithm algorithm) {
  return algorithm == Algorithm::kHMC ? "HMC" : "NUTS";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "HMC") return Algorithm::kHMC;
  if (name == "NUTS") return Algorithm::kNUTS;
  throw ValidationError("unknown algorithm '" + name + "' (expected HMC or NUTS)");
}

std::string to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::kUnit:
      return "unit";
    case MetricKind::kDiag:
      return "diag";
    case MetricKind::kDense:
      return "dense";
  }
  return "?";
}

MetricKind parse_metric(const std::string& name) {
  if (name == "unit") return MetricKind::kUnit;
  if (name == "diag") return MetricKind::kDiag;
  if (name == "dense") return MetricKind::kDense;
  throw ValidationError("unknown metric '" + name +
                        "' (expected unit, diag or dense)");
}

void MCMCControl::validate() const {
  if (iter < 1) throw ValidationError("iter must be at least 1");
  if (warmup < 0 || warmup >= iter) {
    throw ValidationError("warmup must satisfy 0 <= warmup < iter");
  }
  if (thin < 1) throw ValidationError("thin must be at least 1");
  if (num_stored() < 1) {
    throw ValidationError("iter, warmup and thin leave no stored samples");
  }
  if (stepsize.has_value() && !(*stepsize > 0.0 && std::isfinite(*stepsize))) {
    throw ValidationError("stepsize must be positive");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ValidationError("delta must lie in (0,1)");
  }
  if (max_treedepth < 0) throw ValidationError("max_treedepth must be nonnegative");
  if (!(int_time > 0.0 && std::isfinite(int_time))) {
    throw ValidationError("int_time must be positive");
  }
}

MassMatrix MassMatrix::unit(Eigen::Index dim) {
  MassMatrix m;
  m.kind_ = MetricKind::kUnit;
  m.dim_ = dim;
  return m;
}

MassMatrix MassMatrix::diag(Eigen::VectorXd inverse_diagonal) {
  if (!(inverse_diagonal.minCoeff() > 0.0) || !inverse_diagonal.allFinite()) {
    throw NumericalError("diagonal metric must be positive and finite");
  }
  MassMatrix m;
  m.kind_ = MetricKind::kDiag;
  m.dim_ = inverse_diagonal.size();
  m.inv_diag_ = std::move(inverse_diagonal);
  return m;
}

MassMatrix MassMatrix::dense(Eigen::MatrixXd inverse) {
  MassMatrix m;
  m.kind_ = MetricKind::kDense;
  m.dim_ = inverse.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(inverse);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("dense metric is not positive definite");
  }
  m.chol_ = llt.matrixL();
  m.inv_dense_ = std::move(inverse);
  return m;
}

Eigen::VectorXd MassMatrix::velocity(const Eigen::VectorXd& p) const {
  switch (kind_) {
    case MetricKind::kUnit:
      return p;
    case MetricKind::kDiag:
      return inv_diag_.cwiseProduct(p);
    case MetricKind::kDense:
      return inv_dense_ * p;
  }
  return p;
}

double MassMatrix::kinetic(const Eigen::VectorXd& p) const {
  return 0.5 * p.dot(velocity(p));
}

Eigen::VectorXd MassMatrix::draw_momentum(Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(dim_);
  for (Eigen::Index i = 0; i < dim_; ++i) z[i] = normal(rng);
  switch (kind_) {
    case MetricKind::kUnit:
      return z;
    case MetricKind::kDiag:
      return z.cwiseQuotient(inv_diag_.cwiseSqrt());
    case MetricKind::kDense:
      // With inverse = L L', p = L^{-T} z has covariance (L L')^{-1}.
      return chol_.transpose().triangularView<Eigen::Upper>().solve(z);
  }
  return z;
}

PhasePoint make_phase_point(const LogDensityFn& fn, Eigen::VectorXd q) {
  PhasePoint z;
  z.grad.resize(q.size());
  z.log_density = fn(q, &z.grad);
  z.q = std::move(q);
  z.p = Eigen::VectorXd::Zero(z.q.size());
  return z;
}

double hamiltonian(const PhasePoint& z, const MassMatrix& mass) {
  return -z.log_density + mass.kinetic(z.p);
}

LeapfrogResult leapfrog(const PhasePoint& start, double eps,
                        const LogDensityFn& fn, const MassMatrix& mass,
                        int n_steps) {
  LeapfrogResult out;
  out.end = start;
  PhasePoint& z = out.end;
  const double h0 = hamiltonian(start, mass);
  for (int step = 0; step < n_steps; ++step) {
    z.p += 0.5 * eps * z.grad;
    z.q += eps * mass.velocity(z.p);
    z.log_density = fn(z.q, &z.grad);
    z.p += 0.5 * eps * z.grad;
    const double h = hamiltonian(z, mass);
    if (!std::isfinite(h) || !z.grad.allFinite() ||
        h - h0 > kDivergenceThreshold) {
      out.divergent = true;
      out.divergent_step = step;
      out.delta_h = std::isfinite(h) ? h - h0 : std::numeric_limits<double>::infinity();
      return out;
    }
    out.delta_h = h - h0;
  }
  return out;
}

Transition hmc_transition(const PhasePoint& current, double eps,
                          double int_time, const LogDensityFn& fn,
                          const MassMatrix& mass, Rng& rng) {
  PhasePoint start = current;
  start.p = mass.draw_momentum(rng);
  const int steps = std::max(1, static_cast<int>(std::floor(int_time / eps)));
  const LeapfrogResult r = leapfrog(start, eps, fn, mass, steps);

  Transition t;
  t.depth = steps;
  t.n_leapfrog = r.divergent ? r.divergent_step + 1 : steps;
  t.divergent = r.divergent;
  t.accept_stat = r.divergent ? 0.0 : std::min(1.0, std::exp(-r.delta_h));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (!r.divergent && unif(rng) < t.accept_stat) {
    t.state = r.end;
    t.accepted = true;
  } else {
    t.state = current;
  }
  return t;
}

namespace {

struct Tree {
  PhasePoint minus;
  PhasePoint plus;
  PhasePoint proposal;
  long n = 0;
  bool keep_going = true;
  double alpha = 0.0;
  int n_alpha = 0;
  int n_leapfrog = 0;
  bool divergent = false;
};

bool no_u_turn(const PhasePoint& minus, const PhasePoint& plus,
               const MassMatrix& mass) {
  const Eigen::VectorXd dq = plus.q - minus.q;
  return dq.dot(mass.velocity(minus.p)) >= 0.0 &&
         dq.dot(mass.velocity(plus.p)) >= 0.0;
}

Tree build_tree(const PhasePoint& z, double log_u, int direction, int depth,
                double eps, double h0, const LogDensityFn& fn,
                const MassMatrix& mass, Rng& rng) {
  if (depth == 0) {
    const LeapfrogResult r = leapfrog(z, direction * eps, fn, mass, 1);
    Tree t;
    t.minus = t.plus = t.proposal = r.end;
    t.n_leapfrog = 1;
    t.n_alpha = 1;
    if (r.divergent) {
      t.keep_going = false;
      t.divergent = true;
      return t;
    }
    const double h = hamiltonian(r.end, mass);
    t.n = log_u <= -h ? 1 : 0;
    t.keep_going = log_u < -h + kDivergenceThreshold;
    t.divergent = !t.keep_going;
    t.alpha = std::min(1.0, std::exp(h0 - h));
    return t;
  }
  Tree t = build_tree(z, log_u, direction, depth - 1, eps, h0, fn, mass, rng);
  if (!t.keep_going) return t;
  Tree next = build_tree(direction < 0 ? t.minus : t.plus, log_u, direction,
                         depth - 1, eps, h0, fn, mass, rng);
  if (direction < 0) {
    t.minus = std::move(next.minus);
  } else {
    t.plus = std::move(next.plus);
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const long total = t.n + next.n;
  if (total > 0 && unif(rng) < static_cast<double>(next.n) / total) {
    t.proposal = std::move(next.proposal);
  }
  t.n = total;
  t.alpha += next.alpha;
  t.n_alpha += next.n_alpha;
  t.n_leapfrog += next.n_leapfrog;
  t.divergent = t.divergent || next.divergent;
  t.keep_going = next.keep_going && no_u_turn(t.minus, t.plus, mass);
  return t;
}

}  // namespace

Transition nuts_transition(const PhasePoint& current, double eps,
                           int max_treedepth, const LogDensityFn& fn,
                           const MassMatrix& mass, Rng& rng) {
  PhasePoint start = current;
  start.p = mass.draw_momentum(rng);
  const double h0 = hamiltonian(start, mass);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double log_u = -h0 + std::log1p(-unif(rng));  // uniform on (0,1]

  Transition t;
  t.state = current;
  PhasePoint minus = start;
  PhasePoint plus = start;
  long n = 1;
  bool keep_going = true;
  double alpha = 0.0;
  int n_alpha = 0;
  const int max_depth = std::max(1, max_treedepth);
  int depth = 0;
  while (keep_going && depth < max_depth) {
    const int direction = unif(rng) < 0.5 ? -1 : 1;
    Tree tree = build_tree(direction < 0 ? minus : plus, log_u, direction,
                           depth, eps, h0, fn, mass, rng);
    if (direction < 0) {
      minus = tree.minus;
    } else {
      plus = tree.plus;
    }
    if (tree.keep_going && tree.n > 0 &&
        unif(rng) < static_cast<double>(tree.n) / n) {
      t.state = std::move(tree.proposal);
      t.accepted = true;
    }
    n += tree.n;
    alpha += tree.alpha;
    n_alpha += tree.n_alpha;
    t.n_leapfrog += tree.n_leapfrog;
    t.divergent = t.divergent || tree.divergent;
    keep_going = tree.keep_going && no_u_turn(minus, plus, mass);
    ++depth;
  }
  t.depth = depth;
  t.accept_stat = n_alpha > 0 ? alpha / n_alpha : 0.0;
  return t;
}

DualAveragingState DualAveragingState::start(double eps0) {
  DualAveragingState da;
  da.mu = std::log(10.0 * eps0);
  da.log_eps = std::log(eps0);
  return da;
}

void adapt_stepsize(DualAveragingState& da, double accept_stat, double delta) {
  ++da.count;
  const double m = da.count;
  const double eta = 1.0 / (m + DualAveragingState::kT0);
  da.h_bar = (1.0 - eta) * da.h_bar + eta * (delta - accept_stat);
  da.log_eps = da.mu - std::sqrt(m) / DualAveragingState::kGamma * da.h_bar;
  const double w = std::pow(m, -DualAveragingState::kKappa);
  da.log_eps_bar = w * da.log_eps + (1.0 - w) * da.log_eps_bar;
}

double find_initial_stepsize(const PhasePoint& current, double eps,
                             const LogDensityFn& fn, const MassMatrix& mass,
                             Rng& rng) {
  const double log_half = std::log(0.5);
  auto log_accept = [&](double e) {
    PhasePoint start = current;
    start.p = mass.draw_momentum(rng);
    const LeapfrogResult r = leapfrog(start, e, fn, mass, 1);
    return r.divergent ? -std::numeric_limits<double>::infinity() : -r.delta_h;
  };
  const int direction = log_accept(eps) > log_half ? 1 : -1;
  for (int i = 0; i < 100; ++i) {
    const double next = direction > 0 ? eps * 2.0 : eps * 0.5;
    const double a = log_accept(next);
    if (direction > 0 && !(a > log_half)) break;
    eps = next;
    if (direction < 0 && a > log_half) break;
  }
  return eps;
}

MassMatrix adapt_metric(const Eigen::MatrixXd& draws, MetricKind kind) {
  const Eigen::Index dim = draws.cols();
  if (kind == MetricKind::kUnit || draws.rows() < kMinMetricDraws) {
    return MassMatrix::unit(dim);
  }
  const double n = static_cast<double>(draws.rows());
  const Eigen::MatrixXd centered = draws.rowwise() - draws.colwise().mean();
  const double w = n / (n + 5.0);
  const double shrink = 1e-3 * 5.0 / (n + 5.0);
  if (kind == MetricKind::kDiag) {
    const Eigen::VectorXd var =
        centered.array().square().colwise().sum().transpose() / (n - 1.0);
    return MassMatrix::diag((w * var).array() + shrink);
  }
  Eigen::MatrixXd cov = (centered.transpose() * centered) / (n - 1.0);
  cov = w * cov;
  cov.diagonal().array() += shrink;
  cov = 0.5 * (cov + cov.transpose()).eval();
  return MassMatrix::dense(std::move(cov));
}

ChainResult sample_chain(const LogDensityFn& fn, Eigen::VectorXd q0,
                         const MCMCControl& control, Rng& rng,
                         const AfterMoveFn& after_move) {
  control.validate();
  ChainResult out;
  const LogDensityFn counted = [&fn, &out](const Eigen::VectorXd& q,
                                           Eigen::VectorXd* grad) {
    ++out.n_gradients;
    return fn(q, grad);
  };
  out.mass = MassMatrix::unit(q0.size());
  PhasePoint state = make_phase_point(counted, std::move(q0));
  if (!std::isfinite(state.log_density) || !state.grad.allFinite()) {
    throw NumericalError("initial point has a non-finite log density");
  }

  const bool adapt = !control.stepsize.has_value();
  double eps = adapt ? find_initial_stepsize(state, 1.0, counted, out.mass, rng)
                     : *control.stepsize;
  DualAveragingState da = DualAveragingState::start(eps);
  const int warmup = control.warmup;
  const int window_start = warmup / 2;
  const int window_end = warmup - warmup / 5;
  const bool learn_metric = control.metric != MetricKind::kUnit;
  std::vector<Eigen::VectorXd> window;

  int divergent_warmup = 0;
  double accept_sum = 0.0;
  for (int it = 0; it < control.iter; ++it) {
    Transition t = control.algorithm == Algorithm::kNUTS
                       ? nuts_transition(state, eps, control.max_treedepth,
                                         counted, out.mass, rng)
                       : hmc_transition(state, eps, control.int_time, counted,
                                        out.mass, rng);
    state = std::move(t.state);
    if (after_move && after_move(it, state.q)) {
      state = make_phase_point(counted, std::move(state.q));
    }
    out.iter_log_density.push_back(state.log_density);
    out.iter_accept.push_back(t.accept_stat);
    out.iter_depth.push_back(t.depth);
    out.iter_divergent.push_back(t.divergent ? 1 : 0);

    if (it < warmup) {
      if (t.divergent) ++divergent_warmup;
      if (adapt) {
        adapt_stepsize(da, t.accept_stat, control.delta);
        eps = da.step_size();
      }
      if (learn_metric && it >= window_start && it < window_end) {
        window.push_back(state.q);
      }
      if (learn_metric && it == window_end - 1) {
        Eigen::MatrixXd draws(static_cast<Eigen::Index>(window.size()), state.q.size());
        for (size_t i = 0; i < window.size(); ++i) {
          draws.row(static_cast<Eigen::Index>(i)) = window[i].transpose();
        }
        out.mass = adapt_metric(draws, control.metric);
        if (out.mass.kind() == MetricKind::kUnit) {
          out.metric_fallback = true;
          if (control.progress != nullptr) {
            *control.progress << "warning: too few warmup draws for the "
                              << to_string(control.metric)
                              << " metric; using the unit metric\n";
          }
        }
        window.clear();
        state = make_phase_point(counted, std::move(state.q));
        if (adapt) {
          eps = find_initial_stepsize(state, eps, counted, out.mass, rng);
          da = DualAveragingState::start(eps);
        }
      }
      if (it == warmup - 1) {
        if (divergent_warmup == warmup) {
          std::ostringstream msg;
          msg << "all " << warmup << " warmup iterations diverged (last step size "
              << eps << ")";
          throw NumericalError(msg.str());
        }
        if (adapt) eps = da.final_step_size();
      }
    } else {
      accept_sum += t.accept_stat;
      if (t.divergent) ++out.divergences;
      if ((it - warmup + 1) % control.thin == 0) out.draws.push_back(state.q);
    }
    if (control.progress != nullptr && control.print_every > 0 &&
        (it + 1) % control.print_every == 0) {
      *control.progress << "iteration " << it + 1 << "/" << control.iter
                        << (it < warmup ? " (warmup)" : " (sampling)")
                        << ", step size " << eps << '\n';
    }
  }
  out.step_size = eps;
  out.mean_accept = accept_sum / (control.iter - warmup);
  return out;
}

FittedModel run_chain(const Dataset& data, const NetworkShape& shape,
                      const SplineBasis& basis, const PriorConfig& prior,
                      const MCMCControl& control,
                      const Normalization& normalization) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  control.validate();
  prior.validate();
  data.validate();
  shape.validate();
  if (shape.outputs != basis.size()) {
    throw ValidationError("network output width must equal the basis size");
  }
  if (data.num_covariates() != shape.inputs) {
    throw ValidationError("data has " + std::to_string(data.num_covariates()) +
                          " covariates but the network expects " +
                          std::to_string(shape.inputs));
  }

  const std::uint64_t seed = resolve_seed(control.seed);
  Rng rng(seed);
  const Likelihood lik(shape, data, basis);
  const WeightSet w0 = init_weights(shape, rng);
  ScaleState scales = initial_scales(w0.dims(), prior.kind);

  const LogDensityFn log_post = [&](const Eigen::VectorXd& q, Eigen::VectorXd* grad) {
    const WeightSet w(shape, q);
    if (grad == nullptr) {
      return lik.value(w).value + log_prior(w, scales, prior);
    }
    WeightSet g(shape);
    const LikelihoodValue lv = lik.value_and_gradient(w, g);
    *grad = g.flat() + grad_log_prior(w, scales, prior).flat();
    return lv.zero_density ? -std::numeric_limits<double>::infinity()
                           : lv.value + log_prior(w, scales, prior);
  };

  FittedModel model;
  model.shape = shape;
  model.basis = basis;
  model.method = Method::kMCMC;
  model.normalization = normalization;
  model.prior = prior;
  model.seed = seed;

  const AfterMoveFn gibbs = [&](int, const Eigen::VectorXd& q) {
    const WeightSet w(shape, q);
    model.log.iter_loglik.push_back(lik.value(w).value);
    scales = gibbs_update_scales(w, scales, prior, rng);
    return true;
  };
  MCMCControl c = control;
  c.seed = seed;
  const ChainResult chain = sample_chain(log_post, w0.flat(), c, rng, gibbs);

  for (const Eigen::VectorXd& q : chain.draws) {
    model.weights.emplace_back(shape, q);
    model.log.sample_loglik.push_back(lik.value(model.weights.back()).value);
  }
  TrainingLog& log = model.log;
  log.algorithm = to_string(control.algorithm);
  log.target_accept = control.delta;
  log.step_size = chain.step_size;
  log.iter_accept = chain.iter_accept;
  log.iter_depth = chain.iter_depth;
  log.iter_divergent = chain.iter_divergent;
  log.warmup = control.warmup;
  log.thin = control.thin;
  log.divergences = chain.divergences;
  log.mean_accept = chain.mean_accept;
  log.elapsed_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return model;
}

double effective_sample_size(const std::vector<double>& x) {
  const size_t n = x.size();
  if (n < 4) return static_cast<double>(n);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  auto autocov = [&](size_t lag) {
    double s = 0.0;
    for (size_t i = 0; i + lag < n; ++i) s += (x[i] - mean) * (x[i + lag] - mean);
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return static_cast<double>(n);
  double sum = 0.0;
  double previous = std::numeric_limits<double>::infinity();
  for (size_t m = 0; 2 * m + 1 < n; ++m) {
    double pair = (autocov(2 * m) + autocov(2 * m + 1)) / c0;
    if (!(pair > 0.0)) break;
    pair = std::min(pair, previous);
    previous = pair;
    sum += pair;
  }
  const double tau = std::max(-1.0 + 2.0 * sum, 1.0 / std::log10(static_cast<double>(n)));
  return static_cast<double>(n) / tau;
}

}  // namespace spqr
