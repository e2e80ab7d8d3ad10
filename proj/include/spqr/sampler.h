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

#ifndef SPQR_SAMPLER_H_
#define SPQR_SAMPLER_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spqr/model.h"

namespace spqr {

enum class Algorithm { kHMC, kNUTS };
std::string to_string(Algorithm algorithm);
Algorithm parse_algorithm(const std::string& name);

enum class MetricKind { kUnit, kDiag, kDense };
std::string to_string(MetricKind kind);
MetricKind parse_metric(const std::string& name);

struct MCMCControl {
  Algorithm algorithm = Algorithm::kNUTS;
  int iter = 2000;    // including warmup
  int warmup = 500;
  int thin = 1;
  std::optional<double> stepsize;  // absent: adapted during warmup
  MetricKind metric = MetricKind::kDiag;
  double delta = 0.9;              // target acceptance statistic
  int max_treedepth = 6;
  double int_time = 1.0;           // HMC only
  std::optional<std::uint64_t> seed;
  int print_every = 0;             // iterations between progress lines
  std::ostream* progress = nullptr;

  void validate() const;
  int num_stored() const { return (iter - warmup) / thin; }
};

inline constexpr double kDivergenceThreshold = 1000.0;
inline constexpr int kMinMetricDraws = 10;

// Euclidean metric. The stored quantity is the inverse metric (the posterior
// covariance estimate); momenta are drawn from N(0, M).
class MassMatrix {
 public:
  MassMatrix() = default;
  static MassMatrix unit(Eigen::Index dim);
  static MassMatrix diag(Eigen::VectorXd inverse_diagonal);
  static MassMatrix dense(Eigen::MatrixXd inverse);

  MetricKind kind() const { return kind_; }
  Eigen::Index dim() const { return dim_; }
  const Eigen::VectorXd& inverse_diagonal() const { return inv_diag_; }
  const Eigen::MatrixXd& inverse() const { return inv_dense_; }

  Eigen::VectorXd velocity(const Eigen::VectorXd& p) const;  // M^{-1} p
  double kinetic(const Eigen::VectorXd& p) const;            // p' M^{-1} p / 2
  Eigen::VectorXd draw_momentum(Rng& rng) const;

 private:
  MetricKind kind_ = MetricKind::kUnit;
  Eigen::Index dim_ = 0;
  Eigen::VectorXd inv_diag_;
  Eigen::MatrixXd inv_dense_;
  Eigen::MatrixXd chol_;  // lower factor of inv_dense_
};

// Log target density; fills the gradient when `grad` is non-null.
using LogDensityFn = std::function<double(const Eigen::VectorXd& q, Eigen::VectorXd* grad)>;

struct PhasePoint {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
  double log_density = 0.0;
  Eigen::VectorXd grad;  // of the log density at q
};

PhasePoint make_phase_point(const LogDensityFn& fn, Eigen::VectorXd q);

double hamiltonian(const PhasePoint& z, const MassMatrix& mass);

struct LeapfrogResult {
  PhasePoint end;
  double delta_h = 0.0;  // H(end) - H(start)
  bool divergent = false;
  int divergent_step = -1;  // 0-based step where the energy blew up
};

// n_steps of half-kick / drift / half-kick. Stops early on a non-finite or
// divergent energy.
LeapfrogResult leapfrog(const PhasePoint& start, double eps,
                        const LogDensityFn& fn, const MassMatrix& mass,
                        int n_steps);

struct Transition {
  PhasePoint state;         // momentum field is not meaningful
  double accept_stat = 0.0;
  bool accepted = false;
  bool divergent = false;
  int depth = 0;            // NUTS tree depth; HMC leapfrog steps
  int n_leapfrog = 0;
};

// Momentum refresh, L = max(1, floor(int_time / eps)) steps, Metropolis test.
Transition hmc_transition(const PhasePoint& current, double eps,
                          double int_time, const LogDensityFn& fn,
                          const MassMatrix& mass, Rng& rng);

// Slice-sampling NUTS. The tree is doubled at least once and at most
// max(1, max_treedepth) times.
Transition nuts_transition(const PhasePoint& current, double eps,
                           int max_treedepth, const LogDensityFn& fn,
                           const MassMatrix& mass, Rng& rng);

struct DualAveragingState {
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;

  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  int count = 0;

  // Restart around a fresh initial step size, mu = log(10 eps0).
  static DualAveragingState start(double eps0);
  double step_size() const { return std::exp(log_eps); }
  double final_step_size() const { return std::exp(log_eps_bar); }
};

void adapt_stepsize(DualAveragingState& da, double accept_stat, double delta);

// Doubles or halves eps from `eps` until the one-step acceptance
// probability crosses 0.5.
double find_initial_stepsize(const PhasePoint& current, double eps,
                             const LogDensityFn& fn, const MassMatrix& mass,
                             Rng& rng);

// Regularized covariance of the draws (rows): (n/(n+5)) S + 1e-3 (5/(n+5)) I.
// Falls back to the unit metric with fewer than kMinMetricDraws draws.
MassMatrix adapt_metric(const Eigen::MatrixXd& draws, MetricKind kind);

struct ChainResult {
  std::vector<Eigen::VectorXd> draws;  // stored (post-warmup, thinned)
  std::vector<double> iter_log_density;
  std::vector<double> iter_accept;
  std::vector<int> iter_depth;
  std::vector<int> iter_divergent;
  double step_size = 0.0;
  MassMatrix mass;
  double mean_accept = 0.0;  // post-warmup
  int divergences = 0;       // post-warmup
  long n_gradients = 0;
  bool metric_fallback = false;
};

// Called after every transition with the iteration index and current
// position. Returning true means the target changed (for instance after a
// Gibbs step) and the state must be re-evaluated.
using AfterMoveFn = std::function<bool(int iteration, const Eigen::VectorXd& q)>;

// Generic adaptive chain. Warmup: step size by dual averaging throughout; the
// metric is estimated from iterations [warmup/2, warmup - buffer), with
// buffer = min(50, warmup/10), after which the step size is re-initialized
// and dual averaging restarts. Aborts with NumericalError when every warmup
// iteration diverges.
ChainResult sample_chain(const LogDensityFn& fn, Eigen::VectorXd q0,
                         const MCMCControl& control, Rng& rng,
                         const AfterMoveFn& after_move = {});

// Bayesian fit: alternates one HMC/NUTS move of the weights (log-likelihood
// plus hierarchical normal prior at the current scales) with one Gibbs sweep
// of the scales. Data must be on the unit scale.
FittedModel run_chain(const Dataset& data, const NetworkShape& shape,
                      const SplineBasis& basis, const PriorConfig& prior,
                      const MCMCControl& control,
                      const Normalization& normalization = {});

// Effective sample size by Geyer's initial positive sequence.
double effective_sample_size(const std::vector<double>& x);

}  // namespace spqr

#endif  // SPQR_SAMPLER_H_
