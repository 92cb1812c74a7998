//
// Copyright 2026 The userdp-sco Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef USERDP_ALGORITHMS_HPP
#define USERDP_ALGORITHMS_HPP

#include <chrono>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "userdp/core.hpp"
#include "userdp/mechanisms.hpp"
#include "userdp/optimizers.hpp"
#include "userdp/parallel.hpp"
#include "userdp/rng.hpp"
#include "userdp/smoothing.hpp"

namespace userdp {

namespace rngpath {
inline constexpr std::uint64_t kSplit = 0xB0;
inline constexpr std::uint64_t kPhase = 0xB1;
inline constexpr std::uint64_t kGroup = 0xB2;
inline constexpr std::uint64_t kScoreNoise = 0xB3;
inline constexpr std::uint64_t kInclusion = 0xB4;
inline constexpr std::uint64_t kOutputNoise = 0xB5;
inline constexpr std::uint64_t kMinibatch = 0xB6;
inline constexpr std::uint64_t kUserGrad = 0xB7;
inline constexpr std::uint64_t kThreshNoise = 0xB8;
}  // namespace rngpath

/// The schedules' explicit calibration literals, scaled per mode: theory
/// keeps literal * kappa, practical replaces each literal by kappa so
/// desk-scale runs are feasible with every formula shape intact.
struct ScheduleConstants {
  double groups;         // C factor (100)
  double tau1;           // Alg1 tau_i factor (1000)
  double sigma1;         // Alg1 sigma_i factor (100)
  double minibatch;      // Alg3 K_i factor (500)
  double sigma2;         // Alg2 sigma_i factor (1000)
  double lap_score1;     // Alg1 score-noise numerator (20)
  double lap_threshold;  // Alg2 threshold-noise numerator (8)
  double lap_score2;     // Alg2 score-noise numerator (16)

  static ScheduleConstants from(const PrivacyParams& priv) {
    const double k = priv.constant_scale;
    if (priv.mode == ConstantMode::kTheory)
      return {100.0 * k, 1000.0 * k, 100.0 * k, 500.0 * k,
              1000.0 * k, 20.0 * k,  8.0 * k,   16.0 * k};
    return {k, k, k, k, k, k, k, k};
  }
};

enum class NoiseMode { kSeeded, kDisabled };

struct PhaseDiagnostics {
  int phase = 0;
  double raw_score = 0.0;    // Alg1: s_i(tau_i); Alg2: min_t s_i^t
  double noisy_score = 0.0;  // Alg1: s-hat; Alg2: min_t s-hat
  double threshold = 0.0;
  bool passed = true;
  int candidates = 0;     // C (Alg1) or K_i (Alg2)
  int min_selected = 0;   // |S| (Alg1) or min_t |S_i^t| (Alg2)
  double noise_norm = 0;  // output-perturbation (Alg1) / mean gradient noise (Alg2)
  int halt_iteration = -1;
};

struct RunReport {
  Vec output;
  bool halted = false;
  std::optional<int> halt_phase;
  std::int64_t grad_evals = 0;
  double wall_time = 0.0;
  std::vector<PhaseDiagnostics> phases;
  std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// Algorithm 1: phased SGD with outlier iterate removal + output perturbation
// ---------------------------------------------------------------------------

struct Alg1Phase {
  int users = 0;        // n_i
  int group_users = 0;  // N_i = floor(n_i / C)
  long steps = 0;       // T_i = N_i * m
  double stepsize = 0;  // eta_i = eta / 2^(p*i)
  double tau = 0;       // tau_i
  double sigma = 0;     // sigma_i
};

struct PhaseScheduleAlg1 {
  int num_users = 0, items_per_user = 0, dim = 0;
  int phases = 0;  // l
  int groups = 0;  // C
  double p = 0, q = 0, base_stepsize = 0;
  std::vector<Alg1Phase> phase;
  std::vector<std::string> warnings;

  long gradient_budget() const {
    long total = 0;
    for (const auto& ph : phase) total += static_cast<long>(groups) * ph.steps;
    return total;
  }
  int users_required() const {
    int total = 0;
    for (const auto& ph : phase) total += ph.users;
    return total;
  }
};

struct Alg1Options {
  std::optional<double> p, q, stepsize;
};

inline PhaseScheduleAlg1 schedule_alg1(int n, int m, int d,
                                       const PrivacyParams& priv,
                                       double lipschitz, double diameter,
                                       const Alg1Options& opt = {}) {
  priv.validate();
  if (n < 2 || m < 1 || d < 1)
    throw std::invalid_argument("schedule_alg1: need n >= 2, m >= 1, d >= 1");
  const ScheduleConstants cc = ScheduleConstants::from(priv);
  const double eps = priv.epsilon;
  const double delta = priv.delta;

  PhaseScheduleAlg1 s;
  s.num_users = n;
  s.items_per_user = m;
  s.dim = d;
  s.q = opt.q.value_or(0.25);
  s.p = opt.p.value_or(std::log(static_cast<double>(m)) / std::log(static_cast<double>(n)) + 1.5);
  s.base_stepsize = opt.stepsize.value_or(
      diameter / (lipschitz * std::sqrt(static_cast<double>(d) * m * n * eps)));
  if (!(s.q > 0.0)) throw std::invalid_argument("schedule_alg1: q must be positive");
  if (!(s.p > 0.0)) throw std::invalid_argument("schedule_alg1: p must be positive");

  s.phases = static_cast<int>(std::floor(std::log2(static_cast<double>(n))));
  s.groups = static_cast<int>(
      std::ceil(cc.groups * std::log(20.0 * n * m * std::exp(eps) / delta) / eps));
  if (s.groups < 1) s.groups = 1;

  // User-count requirement of the formal guarantee; hard in theory mode,
  // advisory in practical.
  const double lhs = std::pow(static_cast<double>(n), 1.0 - s.q) *
                     (1.0 - std::pow(2.0, -s.q));
  const double rhs = priv.constant_scale * 100.0 * std::log(n / delta) / eps;
  if (lhs < rhs) {
    std::ostringstream msg;
    msg << "user-count condition violated: n^(1-q)(1-2^-q) = " << lhs
        << " < " << rhs;
    if (priv.mode == ConstantMode::kTheory)
      throw InfeasibleScheduleError("schedule_alg1: " + msg.str());
    s.warnings.push_back(msg.str());
  }

  const double log_ndm = std::log(static_cast<double>(n) * d * m);
  const double log_nd2 = std::pow(std::log(n / delta), 2.0);
  for (int i = 1; i <= s.phases; ++i) {
    Alg1Phase ph;
    ph.users = static_cast<int>(std::floor(
        (1.0 - std::pow(0.5, s.q)) * n / std::pow(2.0, s.q * i)));
    if (ph.users < 1)
      throw InfeasibleScheduleError("schedule_alg1: phase " + std::to_string(i) +
                                    " has no users (n_i = 0)");
    ph.group_users = ph.users / s.groups;
    if (ph.group_users < 1)
      throw InfeasibleScheduleError("schedule_alg1: phase " + std::to_string(i) +
                                    " infeasible (N_i = 0 with C = " +
                                    std::to_string(s.groups) + ")");
    ph.steps = static_cast<long>(ph.group_users) * m;
    ph.stepsize = s.base_stepsize / std::pow(2.0, s.p * i);
    ph.tau = cc.tau1 * ph.stepsize * lipschitz *
             std::sqrt(static_cast<double>(ph.steps)) * log_ndm;
    ph.sigma = cc.sigma1 * ph.tau * log_nd2 / (eps * s.groups);
    s.phase.push_back(ph);
  }
  return s;
}

namespace detail {

/// One phase of Algorithm 1 up to (but excluding) the Gaussian output
/// perturbation: runs the C group SGDs from `start`, applies the noisy score
/// gate and the outlier filter, and returns the selected-iterate mean.
/// Shared by phased_sgd and the sensitivity audit (which couples two calls).
struct Alg1PhaseOutcome {
  bool passed = false;
  Vec mean;  // valid when passed and selected nonempty
  PhaseDiagnostics diag;
};

inline Alg1PhaseOutcome run_alg1_phase(const DatasetView& phase_users,
                                       const LossModel& loss,
                                       const BallDomain& domain,
                                       const PhaseScheduleAlg1& sched,
                                       int phase_index,  // 1-based
                                       const Vec& start, NoiseSource& noise,
                                       const ScheduleConstants& cc, double eps,
                                       RngStream phase_rng, GradCounter& counter,
                                       int jobs) {
  const Alg1Phase& ph = sched.phase[phase_index - 1];
  const int c = sched.groups;

  std::vector<Vec> iterates(c);
  parallel_for(jobs, c, [&](int j) {
    const DatasetView group = phase_users.slice(j * ph.group_users, ph.group_users);
    SgdConfig cfg;
    cfg.stepsize = ph.stepsize;
    cfg.steps = ph.steps;
    cfg.start = start;
    iterates[j] = one_pass_sgd(loss, group, cfg, domain,
                               phase_rng.derive({rngpath::kGroup,
                                                 static_cast<std::uint64_t>(j)}),
                               counter);
  });

  Alg1PhaseOutcome out;
  out.diag.phase = phase_index;
  out.diag.candidates = c;
  out.diag.raw_score = concentration_score(iterates, ph.tau);
  out.diag.noisy_score = out.diag.raw_score + noise.laplace(cc.lap_score1 / eps);
  out.diag.threshold = 4.0 * c / 5.0;
  out.diag.passed = out.diag.noisy_score >= out.diag.threshold;
  out.passed = out.diag.passed;
  if (!out.passed) return out;

  RngStream incl_rng = phase_rng.derive({rngpath::kInclusion});
  ConcentrationReport filter = filter_outliers(iterates, ph.tau, incl_rng);
  out.diag.min_selected = static_cast<int>(filter.selected.size());
  if (filter.selected.empty()) {
    out.passed = false;
    out.diag.passed = false;
    return out;
  }
  Vec mean = Vec::Zero(start.size());
  for (int idx : filter.selected) mean += iterates[idx];
  out.mean = mean / static_cast<double>(filter.selected.size());
  return out;
}

}  // namespace detail

/// Algorithm 1. Phases consume disjoint user blocks of one global seeded
/// permutation; halting (failed score gate) aborts the run and outputs the
/// domain center.
inline RunReport phased_sgd(const UserDataset& data, const LossModel& loss,
                            const BallDomain& domain, const PrivacyParams& priv,
                            const PhaseScheduleAlg1& sched, std::uint64_t seed,
                            NoiseMode noise_mode = NoiseMode::kSeeded,
                            int jobs = 1) {
  priv.validate();
  const auto t0 = std::chrono::steady_clock::now();
  if (sched.users_required() > data.num_users())
    throw InfeasibleScheduleError("phased_sgd: schedule needs " +
                                  std::to_string(sched.users_required()) +
                                  " users, dataset has " +
                                  std::to_string(data.num_users()));
  if (sched.items_per_user != data.items_per_user())
    throw std::invalid_argument("phased_sgd: schedule m mismatch");
  if (loss.is_smooth()) {
    for (const auto& ph : sched.phase)
      if (ph.stepsize > 1.0 / loss.smoothness)
        throw std::invalid_argument("phased_sgd: stepsize above 1/beta");
  }

  RunReport report;
  report.warnings = sched.warnings;
  const ScheduleConstants cc = ScheduleConstants::from(priv);
  RngStream root(seed);

  std::vector<int> sizes;
  for (const auto& ph : sched.phase) sizes.push_back(ph.users);
  const auto phase_views = split_users(data, sizes, root.derive({rngpath::kSplit}));

  // Risk-guarantee precondition (warn only): beta <= (L/R) sqrt(dmn eps).
  if (loss.is_smooth()) {
    const double bound = loss.lipschitz / domain.diameter() *
                         std::sqrt(static_cast<double>(sched.dim) *
                                   sched.items_per_user * sched.num_users *
                                   priv.epsilon);
    if (loss.smoothness > bound)
      report.warnings.push_back("smoothness above the risk-guarantee bound");
  }

  GradCounter counter;
  Vec x = domain.center();
  for (int i = 1; i <= sched.phases; ++i) {
    RngStream phase_rng = root.derive({rngpath::kPhase, static_cast<std::uint64_t>(i)});
    NoiseSource noise = noise_mode == NoiseMode::kDisabled
                            ? NoiseSource::disabled()
                            : NoiseSource::seeded(
                                  phase_rng.derive({rngpath::kScoreNoise}));
    auto outcome = detail::run_alg1_phase(phase_views[i - 1], loss, domain,
                                          sched, i, x, noise, cc, priv.epsilon,
                                          phase_rng, counter, jobs);
    if (!outcome.passed) {
      report.phases.push_back(outcome.diag);
      report.halted = true;
      report.halt_phase = i;
      report.output = domain.center();
      report.grad_evals = counter.count();
      report.wall_time =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      return report;
    }
    NoiseSource out_noise = noise_mode == NoiseMode::kDisabled
                                ? NoiseSource::disabled()
                                : NoiseSource::seeded(
                                      phase_rng.derive({rngpath::kOutputNoise}));
    const Vec zeta =
        out_noise.gaussian_vector(sched.phase[i - 1].sigma, domain.dim());
    outcome.diag.noise_norm = zeta.norm();
    report.phases.push_back(outcome.diag);
    x = domain.project(outcome.mean + zeta);
  }
  report.output = x;
  report.grad_evals = counter.count();
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

// ---------------------------------------------------------------------------
// Algorithms 2 + 3: accelerated phased ERM with outlier gradient removal
// ---------------------------------------------------------------------------

struct Alg3Phase {
  int users = 0;        // n_i
  double lambda = 0;    // lambda_i
  long iters = 0;       // T_i
  int minibatch = 0;    // K_i
  double sigma = 0;     // sigma_i
  bool minibatch_clamped = false;
};

struct PhaseScheduleAlg3 {
  int num_users = 0, items_per_user = 0, dim = 0;
  int phases = 0;
  double tau = 0;          // c_tau * L * log(ndm) / sqrt(m)
  double base_lambda = 0;  // lambda
  double p = 0, q = 0, c_tau = 1.0, c_t = 1.0;
  double smoothness = 0;  // beta used to derive T_i
  std::vector<Alg3Phase> phase;
  std::vector<std::string> warnings;

  long gradient_budget() const {
    long total = 0;
    for (const auto& ph : phase)
      total += ph.iters * static_cast<long>(ph.minibatch) * items_per_user;
    return total;
  }
  int users_required() const {
    int total = 0;
    for (const auto& ph : phase) total += ph.users;
    return total;
  }
};

struct Alg3Options {
  std::optional<double> p, q, lambda, c_tau, c_t;
  bool nonsmooth_iters = false;  // T_i = 1 + ceil(n_i^(3/4) m^(1/2) eps^(1/2) log(ndm))
};

inline PhaseScheduleAlg3 schedule_alg3(int n, int m, int d,
                                       const PrivacyParams& priv,
                                       double lipschitz, double diameter,
                                       double beta,
                                       const Alg3Options& opt = {}) {
  priv.validate();
  if (n < 2 || m < 1 || d < 1)
    throw std::invalid_argument("schedule_alg3: need n >= 2, m >= 1, d >= 1");
  if (!std::isfinite(beta) && !opt.nonsmooth_iters)
    throw std::invalid_argument(
        "schedule_alg3: non-smooth loss; use the smoothing wrapper");
  const ScheduleConstants cc = ScheduleConstants::from(priv);
  const double eps = priv.epsilon;
  const double delta = priv.delta;

  PhaseScheduleAlg3 s;
  s.num_users = n;
  s.items_per_user = m;
  s.dim = d;
  s.smoothness = beta;
  s.q = opt.q.value_or(0.25);
  s.c_tau = opt.c_tau.value_or(1.0);
  s.c_t = opt.c_t.value_or(1.0);
  const double log_n = std::log(static_cast<double>(n));
  s.p = opt.p.value_or(3.0 * s.q + 2.5 +
                       std::log(std::sqrt(static_cast<double>(m))) / log_n);
  s.base_lambda = opt.lambda.value_or(
      (lipschitz / diameter) *
      (1.0 / std::sqrt(static_cast<double>(n) * m) +
       std::sqrt(static_cast<double>(d)) /
           (eps * n * std::sqrt(static_cast<double>(m)))));
  if (!(s.q > 0.0)) throw std::invalid_argument("schedule_alg3: q must be positive");
  if (!(s.base_lambda > 0.0))
    throw std::invalid_argument("schedule_alg3: lambda must be positive");
  if (delta >= 1.0 / (static_cast<double>(m) * n))
    s.warnings.push_back("delta above 1/(nm); utility theorem assumption violated");

  s.phases = static_cast<int>(std::floor(std::log2(static_cast<double>(n))));
  const double log_ndm = std::log(static_cast<double>(n) * d * m);
  s.tau = s.c_tau * lipschitz * log_ndm / std::sqrt(static_cast<double>(m));

  for (int i = 1; i <= s.phases; ++i) {
    Alg3Phase ph;
    ph.users = static_cast<int>(std::floor(
        (1.0 - std::pow(0.5, s.q)) * n / std::pow(2.0, s.q * i)));
    if (ph.users < 1)
      throw InfeasibleScheduleError("schedule_alg3: phase " + std::to_string(i) +
                                    " has no users (n_i = 0)");
    ph.lambda = s.base_lambda * std::pow(2.0, s.p * i);
    if (opt.nonsmooth_iters) {
      ph.iters = 1 + static_cast<long>(std::ceil(
                         std::pow(static_cast<double>(ph.users), 0.75) *
                         std::sqrt(static_cast<double>(m)) * std::sqrt(eps) *
                         log_ndm));
    } else {
      ph.iters = static_cast<long>(std::ceil(
          s.c_t * (1.0 + std::sqrt(beta / ph.lambda)) * log_ndm));
    }
    if (ph.iters < 1) ph.iters = 1;
    const double k_raw =
        cc.minibatch *
        std::log(static_cast<double>(ph.users) * ph.users * m * m *
                 std::exp(eps) / delta) *
        (1.0 / eps + ph.users * eps /
                         std::sqrt(static_cast<double>(ph.iters) *
                                   std::log(1.0 / delta)));
    int k = static_cast<int>(std::ceil(k_raw));
    if (k < 1) k = 1;
    if (k > ph.users) {
      k = ph.users;
      ph.minibatch_clamped = true;
      s.warnings.push_back("phase " + std::to_string(i) +
                           ": K_i clamped to n_i (subsampling amplification degraded)");
    }
    ph.minibatch = k;
    if (ph.iters * static_cast<long>(ph.minibatch) < ph.users)
      s.warnings.push_back("phase " + std::to_string(i) + ": T_i*K_i < n_i");
    ph.sigma = cc.sigma2 * s.tau * std::sqrt(static_cast<double>(ph.iters)) *
               std::log(static_cast<double>(n) * d * std::exp(eps) / delta) /
               (eps * ph.users);
    s.phase.push_back(ph);
  }
  return s;
}

struct Alg2Result {
  Vec output;
  bool halted = false;
  PhaseDiagnostics diag;
};

/// Algorithm 2: one phase of user-level DP accelerated minibatch SGD on the
/// regularized objective F_i(x) = (1/n_i) sum_Z F(x, Z) + (lambda_i/2)
/// ||x - x_center||^2. Scores and outlier filtering are evaluated at the
/// AC-SA query point; the noisy threshold is drawn once per phase.
inline Alg2Result dp_accel_minibatch_sgd(
    const LossModel& loss, const DatasetView& users, const Vec& x_center,
    double lambda, long iters, int minibatch, double tau, double sigma,
    const PrivacyParams& priv, const BallDomain& domain, RngStream phase_rng,
    NoiseMode noise_mode, GradCounter& counter, int jobs, int phase_index = 1) {
  if (minibatch < 1 || minibatch > users.num_users())
    throw std::invalid_argument("dp_accel_minibatch_sgd: bad minibatch size");
  if (!(tau > 0.0))
    throw std::invalid_argument("dp_accel_minibatch_sgd: tau must be positive");
  const ScheduleConstants cc = ScheduleConstants::from(priv);
  const double eps = priv.epsilon;
  const double beta = loss.is_smooth() ? loss.smoothness : 0.0;

  AcSaParams params{lambda, beta + 2.0 * lambda};
  const long stage = ac_sa_stage_length(params);
  AcSa acsa(params, x_center, domain);

  NoiseSource gate_noise =
      noise_mode == NoiseMode::kDisabled
          ? NoiseSource::disabled()
          : NoiseSource::seeded(phase_rng.derive({rngpath::kThreshNoise}));
  NoiseSource grad_noise =
      noise_mode == NoiseMode::kDisabled
          ? NoiseSource::disabled()
          : NoiseSource::seeded(phase_rng.derive({rngpath::kOutputNoise}));
  // Threshold noise is drawn once here; per-iteration score noise comes from
  // the same gate.
  AboveThreshold gate(4.0 * minibatch / 5.0, cc.lap_threshold / eps,
                      cc.lap_score2 / eps, gate_noise);

  Alg2Result result;
  result.diag.phase = phase_index;
  result.diag.candidates = minibatch;
  result.diag.threshold = gate.noisy_threshold();
  result.diag.raw_score = std::numeric_limits<double>::infinity();
  result.diag.noisy_score = std::numeric_limits<double>::infinity();
  result.diag.min_selected = minibatch;
  double noise_norm_sum = 0.0;

  for (long t = 1; t <= iters; ++t) {
    const Vec query = acsa.query_point();
    RngStream mb_rng =
        phase_rng.derive({rngpath::kMinibatch, static_cast<std::uint64_t>(t)});
    std::vector<int> picks(minibatch);
    for (int k = 0; k < minibatch; ++k)
      picks[k] = static_cast<int>(
          mb_rng.next_below(static_cast<std::uint64_t>(users.num_users())));

    std::vector<Vec> grads(minibatch);
    parallel_for(jobs, minibatch, [&](int k) {
      RngStream g_rng = phase_rng.derive({rngpath::kUserGrad,
                                          static_cast<std::uint64_t>(t),
                                          static_cast<std::uint64_t>(k)});
      grads[k] = user_avg_gradient(loss, query, users.user(picks[k]), counter,
                                   &g_rng);
    });

    const double raw = concentration_score(grads, 2.0 * tau);
    const double noisy = gate.noised(raw);
    result.diag.raw_score = std::min(result.diag.raw_score, raw);
    result.diag.noisy_score = std::min(result.diag.noisy_score, noisy);
    if (noisy < gate.noisy_threshold()) {
      result.halted = true;
      result.diag.passed = false;
      result.diag.halt_iteration = static_cast<int>(t);
      result.output = domain.center();
      return result;
    }

    RngStream incl_rng = phase_rng.derive({rngpath::kInclusion,
                                           static_cast<std::uint64_t>(t)});
    const ConcentrationReport filter = filter_outliers(grads, tau, incl_rng);
    result.diag.min_selected =
        std::min(result.diag.min_selected, static_cast<int>(filter.selected.size()));
    if (filter.selected.empty()) {
      result.halted = true;
      result.diag.passed = false;
      result.diag.halt_iteration = static_cast<int>(t);
      result.output = domain.center();
      return result;
    }
    Vec g = Vec::Zero(domain.dim());
    for (int idx : filter.selected) g += grads[idx];
    g /= static_cast<double>(filter.selected.size());
    const Vec zeta = grad_noise.gaussian_vector(sigma, domain.dim());
    noise_norm_sum += zeta.norm();
    const Vec estimate = g + zeta + lambda * (query - x_center);
    acsa.step(estimate);
    if (t % stage == 0 && t < iters) acsa.restart();
  }
  result.output = acsa.aggregate();
  result.diag.noise_norm = noise_norm_sum / static_cast<double>(iters);
  return result;
}

/// Algorithm 3: iterative localization over regularized phase objectives,
/// each solved by dp_accel_minibatch_sgd. Halting anywhere aborts the run.
inline RunReport accelerated_phased_erm(const UserDataset& data,
                                        const LossModel& loss,
                                        const BallDomain& domain,
                                        const PrivacyParams& priv,
                                        const PhaseScheduleAlg3& sched,
                                        std::uint64_t seed,
                                        NoiseMode noise_mode = NoiseMode::kSeeded,
                                        int jobs = 1) {
  priv.validate();
  const auto t0 = std::chrono::steady_clock::now();
  if (sched.users_required() > data.num_users())
    throw InfeasibleScheduleError("accelerated_phased_erm: schedule needs " +
                                  std::to_string(sched.users_required()) +
                                  " users, dataset has " +
                                  std::to_string(data.num_users()));
  if (sched.items_per_user != data.items_per_user())
    throw std::invalid_argument("accelerated_phased_erm: schedule m mismatch");

  RunReport report;
  report.warnings = sched.warnings;
  RngStream root(seed);
  std::vector<int> sizes;
  for (const auto& ph : sched.phase) sizes.push_back(ph.users);
  const auto phase_views = split_users(data, sizes, root.derive({rngpath::kSplit}));

  GradCounter counter;
  Vec x = domain.center();
  for (int i = 1; i <= sched.phases; ++i) {
    const Alg3Phase& ph = sched.phase[i - 1];
    RngStream phase_rng = root.derive({rngpath::kPhase, static_cast<std::uint64_t>(i)});
    Alg2Result r = dp_accel_minibatch_sgd(
        loss, phase_views[i - 1], x, ph.lambda, ph.iters, ph.minibatch,
        sched.tau, ph.sigma, priv, domain, phase_rng, noise_mode, counter,
        jobs, i);
    report.phases.push_back(r.diag);
    if (r.halted) {
      report.halted = true;
      report.halt_phase = i;
      report.output = domain.center();
      report.grad_evals = counter.count();
      report.wall_time =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      return report;
    }
    x = r.output;
  }
  report.output = x;
  report.grad_evals = counter.count();
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

/// Non-smooth pipeline: randomized-smoothing wrapper (radius
/// r = sqrt(d) R / (eps n sqrt(m))) around the loss, then Algorithm 3 with
/// the non-smooth iteration count T_i = 1 + ceil(n_i^(3/4) m^(1/2) eps^(1/2)
/// log(ndm)).
inline RunReport nonsmooth_solve(const UserDataset& data, const LossModel& loss,
                                 const BallDomain& domain,
                                 const PrivacyParams& priv, std::uint64_t seed,
                                 NoiseMode noise_mode = NoiseMode::kSeeded,
                                 int jobs = 1, Alg3Options opt = {},
                                 int smoothing_samples = 1) {
  priv.validate();
  const int n = data.num_users();
  const int m = data.items_per_user();
  const int d = domain.dim();
  const double r = std::sqrt(static_cast<double>(d)) * domain.diameter() /
                   (priv.epsilon * n * std::sqrt(static_cast<double>(m)));
  if (loss.domain_margin < r)
    throw DomainMarginError("nonsmooth_solve: loss not defined on the expanded domain");
  SmoothedLoss smoothed(loss, domain, r, smoothing_samples);
  const LossModel wrapped = smoothed.as_loss_model();
  opt.nonsmooth_iters = true;
  const PhaseScheduleAlg3 sched =
      schedule_alg3(n, m, d, priv, wrapped.lipschitz, domain.diameter(),
                    wrapped.smoothness, opt);
  return accelerated_phased_erm(data, wrapped, domain, priv, sched, seed,
                                noise_mode, jobs);
}

}  // namespace userdp

#endif  // USERDP_ALGORITHMS_HPP
