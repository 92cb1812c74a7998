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

#ifndef USERDP_AUDIT_HPP
#define USERDP_AUDIT_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "userdp/algorithms.hpp"
#include "userdp/core.hpp"
#include "userdp/mechanisms.hpp"
#include "userdp/optimizers.hpp"
#include "userdp/problems.hpp"
#include "userdp/rng.hpp"

namespace userdp {

struct AuditMeasurement {
  std::string series;
  double param = 0.0;
  int trial = 0;
  double value = 0.0;
  double bound = std::numeric_limits<double>::infinity();
  bool within = true;
};

struct AuditReport {
  std::string name;
  int trials = 0;
  bool passed = false;
  std::string bound_formula;  // rendered with substituted values
  std::vector<std::pair<std::string, double>> summary;
  std::vector<AuditMeasurement> rows;

  double summary_value(const std::string& key, double fallback = 0.0) const {
    for (const auto& [k, v] : summary)
      if (k == key) return v;
    return fallback;
  }
};

inline void write_audit_csv(const AuditReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# userdp-sco-audit v1\n";
  out << "# audit: " << report.name << "\n";
  out << "# bound: " << report.bound_formula << "\n";
  out << "series,param,trial,value,bound,within\n";
  char buf[64];
  for (const auto& row : report.rows) {
    std::snprintf(buf, sizeof buf, "%.17g", row.param);
    out << row.series << ',' << buf << ',' << row.trial << ',';
    std::snprintf(buf, sizeof buf, "%.17g", row.value);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", row.bound);
    out << buf << ',' << (row.within ? 1 : 0) << '\n';
  }
  out << "summary," << report.name << ',' << report.trials << ','
      << (report.passed ? "PASS" : "FAIL");
  for (const auto& [k, v] : report.summary) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << ',' << k << '=' << buf;
  }
  out << '\n';
}

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double quantile_of(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace detail

struct StabilityOptions {
  double eta = 0.001;
  std::vector<long> t_values = {64, 256};
  int trials = 200;
  double zeta = 0.05;
};

/// Paired independent one-pass SGD runs from a shared start on freshly drawn
/// i.i.d. datasets; validates the sqrt(T) growth of ||x~ - y~|| and reports
/// the fitted constant of the eta*L*sqrt(T log(dT/zeta)) envelope.
inline AuditReport stability_experiment(const ProblemSpec& spec,
                                        const LossModel& loss,
                                        const StabilityOptions& opt,
                                        std::uint64_t seed) {
  if (loss.is_smooth() && opt.eta > 1.0 / loss.smoothness)
    throw std::invalid_argument("stability_experiment: eta above 1/beta");
  const BallDomain domain = spec.domain();
  AuditReport report;
  report.name = "stability";
  report.trials = opt.trials;
  {
    std::ostringstream os;
    os << "||x~ - y~|| quantile(1-zeta) <= c * eta*L*sqrt(T*log(d*T/zeta)),"
       << " eta=" << opt.eta << " L=" << loss.lipschitz << " zeta=" << opt.zeta
       << "; median(4T)/median(T) in [1.5, 3]";
    report.bound_formula = os.str();
  }

  RngStream root(seed);
  std::vector<double> medians;
  double fitted_c = 0.0;
  for (std::size_t ti = 0; ti < opt.t_values.size(); ++ti) {
    const long t_steps = opt.t_values[ti];
    std::vector<double> dists;
    dists.reserve(opt.trials);
    const double envelope =
        opt.eta * loss.lipschitz *
        std::sqrt(static_cast<double>(t_steps) *
                  std::log(static_cast<double>(spec.dim) * t_steps / opt.zeta));
    for (int trial = 0; trial < opt.trials; ++trial) {
      RngStream tr = root.derive({static_cast<std::uint64_t>(ti),
                                  static_cast<std::uint64_t>(trial)});
      const std::uint64_t seed_a = tr.derive({1}).key();
      const std::uint64_t seed_b = tr.derive({2}).key();
      const UserDataset da =
          generate_dataset(spec, static_cast<int>(t_steps), 1, seed_a);
      const UserDataset db =
          generate_dataset(spec, static_cast<int>(t_steps), 1, seed_b);
      SgdConfig cfg;
      cfg.stepsize = opt.eta;
      cfg.steps = t_steps;
      cfg.start = domain.center();
      GradCounter gc;
      const Vec xa = one_pass_sgd(loss, DatasetView::all(da), cfg, domain,
                                  tr.derive({3}), gc);
      const Vec xb = one_pass_sgd(loss, DatasetView::all(db), cfg, domain,
                                  tr.derive({4}), gc);
      const double dist = (xa - xb).norm();
      dists.push_back(dist);
      report.rows.push_back({"distance", static_cast<double>(t_steps), trial,
                             dist, envelope, true});
    }
    const double med = detail::median_of(dists);
    const double quant = detail::quantile_of(dists, 1.0 - opt.zeta);
    medians.push_back(med);
    if (envelope > 0.0) fitted_c = std::max(fitted_c, quant / envelope);
    report.summary.emplace_back("median_T" + std::to_string(t_steps), med);
    report.summary.emplace_back("q" + std::to_string(static_cast<int>(100 * (1 - opt.zeta))) +
                                    "_T" + std::to_string(t_steps),
                                quant);
  }
  report.summary.emplace_back("fitted_c", fitted_c);

  bool ok = true;
  for (std::size_t i = 0; i + 1 < opt.t_values.size(); ++i) {
    if (opt.t_values[i + 1] != 4 * opt.t_values[i]) continue;
    const double lo = medians[i], hi = medians[i + 1];
    double ratio;
    if (lo == 0.0 && hi == 0.0)
      ratio = 2.0;  // degenerate zero-stepsize case: trivially consistent
    else if (lo == 0.0)
      ratio = std::numeric_limits<double>::infinity();
    else
      ratio = hi / lo;
    report.summary.emplace_back(
        "ratio_T" + std::to_string(opt.t_values[i]), ratio);
    ok = ok && ratio >= 1.5 && ratio <= 3.0;
  }
  report.passed = ok;
  return report;
}

struct SensitivityOptions {
  int trials = 500;
  int controls = 10;
  double tau_scale = 1.0;  // deliberate mis-scaling hook (tau_scale=0.01 must fail)
};

/// Coupled neighboring-run sensitivity audit: one phase of Algorithm 1 (and a
/// single Algorithm-2 iteration) on datasets differing in one user's items,
/// with shared randomness everywhere and noise disabled. A halted or empty
/// selection counts as a bound violation, so mis-calibrated tau fails loudly.
inline AuditReport sensitivity_experiment(const ProblemSpec& spec,
                                          const LossModel& loss,
                                          const PrivacyParams& priv,
                                          PhaseScheduleAlg1 sched,
                                          const SensitivityOptions& opt,
                                          std::uint64_t seed) {
  const BallDomain domain = spec.domain();
  for (auto& ph : sched.phase) ph.tau *= opt.tau_scale;
  const int n = sched.num_users;
  const int m = sched.items_per_user;
  const ScheduleConstants cc = ScheduleConstants::from(priv);

  PhaseScheduleAlg3 sched3 =
      schedule_alg3(n, m, sched.dim, priv, loss.lipschitz, domain.diameter(),
                    loss.smoothness);
  sched3.tau *= opt.tau_scale;

  AuditReport report;
  report.name = "sensitivity";
  report.trials = opt.trials;
  const double bound1 =
      sched.phase[0].tau * std::log(static_cast<double>(n) * m) / sched.groups;
  const double bound2 = sched3.tau * std::log(static_cast<double>(n) * m) /
                        sched3.phase[0].minibatch;
  {
    std::ostringstream os;
    os << "alg1 phase: ||mean(S) - mean(S')|| <= tau_1*log(nm)/C = " << bound1
       << "; alg2 iter: <= tau*log(nm)/K_1 = " << bound2
       << "; >= 99% of trials";
    report.bound_formula = os.str();
  }

  RngStream root(seed);
  NoiseSource off = NoiseSource::disabled();
  int ok1 = 0, ok2 = 0;
  bool controls_zero = true;
  const int total = opt.trials + opt.controls;
  for (int trial = 0; trial < total; ++trial) {
    const bool control = trial < opt.controls;
    RngStream tr = root.derive({static_cast<std::uint64_t>(trial)});
    const std::uint64_t data_seed = tr.derive({1}).key();
    const UserDataset da = generate_dataset(spec, n, m, data_seed);

    // Both runs share the split permutation; the replaced user is the one in
    // permutation slot 0 so the change always lands in phase 1, group 0.
    RngStream split_rng = tr.derive({2});
    const auto perm = split_rng.permutation(static_cast<std::size_t>(n));
    const int replaced = static_cast<int>(perm[0]);
    const UserDataset db =
        control ? with_user_replaced(da, replaced, da.user(replaced))
                : with_user_replaced(
                      da, replaced, regenerate_user(spec, m, data_seed, replaced));

    std::vector<int> phase_ids(sched.phase[0].users);
    for (int i = 0; i < sched.phase[0].users; ++i)
      phase_ids[i] = static_cast<int>(perm[i]);
    const DatasetView va(da, phase_ids);
    const DatasetView vb(db, phase_ids);

    GradCounter gc;
    RngStream phase_rng = tr.derive({3});
    const auto ra = detail::run_alg1_phase(va, loss, domain, sched, 1,
                                           domain.center(), off, cc,
                                           priv.epsilon, phase_rng, gc, 1);
    const auto rb = detail::run_alg1_phase(vb, loss, domain, sched, 1,
                                           domain.center(), off, cc,
                                           priv.epsilon, phase_rng, gc, 1);
    double dist1;
    if (ra.passed && rb.passed)
      dist1 = (ra.mean - rb.mean).norm();
    else
      dist1 = std::numeric_limits<double>::infinity();  // good event failed

    // Algorithm-2 analogue: one coupled minibatch iteration at the center.
    const int k = sched3.phase[0].minibatch;
    RngStream mb_rng = tr.derive({4});
    std::vector<int> picks(k);
    for (int j = 0; j < k; ++j)
      picks[j] = static_cast<int>(
          mb_rng.next_below(static_cast<std::uint64_t>(va.num_users())));
    std::vector<Vec> qa(k), qb(k);
    for (int j = 0; j < k; ++j) {
      RngStream ga = tr.derive({5, static_cast<std::uint64_t>(j)});
      RngStream gb = ga;
      qa[j] = user_avg_gradient(loss, domain.center(), va.user(picks[j]), gc, &ga);
      qb[j] = user_avg_gradient(loss, domain.center(), vb.user(picks[j]), gc, &gb);
    }
    RngStream incl_a = tr.derive({6});
    RngStream incl_b = tr.derive({6});
    const auto fa = filter_outliers(qa, sched3.tau, incl_a);
    const auto fb = filter_outliers(qb, sched3.tau, incl_b);
    double dist2;
    if (!fa.selected.empty() && !fb.selected.empty()) {
      Vec mean_a = Vec::Zero(domain.dim());
      Vec mean_b = Vec::Zero(domain.dim());
      for (int idx : fa.selected) mean_a += qa[idx];
      for (int idx : fb.selected) mean_b += qb[idx];
      mean_a /= static_cast<double>(fa.selected.size());
      mean_b /= static_cast<double>(fb.selected.size());
      dist2 = (mean_a - mean_b).norm();
    } else {
      dist2 = std::numeric_limits<double>::infinity();
    }

    if (control) {
      controls_zero = controls_zero && dist1 == 0.0 && dist2 == 0.0;
      report.rows.push_back({"control_alg1", 0.0, trial, dist1, 0.0, dist1 == 0.0});
      report.rows.push_back({"control_alg2", 0.0, trial, dist2, 0.0, dist2 == 0.0});
    } else {
      const bool w1 = dist1 <= bound1;
      const bool w2 = dist2 <= bound2;
      ok1 += w1;
      ok2 += w2;
      report.rows.push_back({"alg1_phase", 1.0, trial, dist1, bound1, w1});
      report.rows.push_back({"alg2_iter", 1.0, trial, dist2, bound2, w2});
    }
  }
  const double frac1 = static_cast<double>(ok1) / opt.trials;
  const double frac2 = static_cast<double>(ok2) / opt.trials;
  report.summary.emplace_back("alg1_within_fraction", frac1);
  report.summary.emplace_back("alg2_within_fraction", frac2);
  report.summary.emplace_back("controls_exact_zero", controls_zero ? 1.0 : 0.0);
  report.passed = controls_zero && frac1 >= 0.99 && frac2 >= 0.99;
  return report;
}

struct VarianceOptions {
  int minibatch = 32;  // K
  std::vector<int> m_values = {4, 8};
  int trials = 1000;
  int num_users = 256;  // n
};

/// Minibatch-gradient variance audit: with K users drawn with replacement and
/// no removal or noise, E||g - grad F~||^2 should halve when either m or K
/// doubles (factor within [1.5, 3]).
inline AuditReport variance_experiment(const ProblemSpec& spec,
                                       const LossModel& loss,
                                       const VarianceOptions& opt,
                                       std::uint64_t seed) {
  const BallDomain domain = spec.domain();
  Vec x_ref = domain.center();
  x_ref[0] += 0.25 * domain.radius();

  AuditReport report;
  report.name = "variance";
  report.trials = opt.trials;
  {
    std::ostringstream os;
    os << "E||g - grad F~||^2 <~ L^2 log(ndm)/(K m), L=" << loss.lipschitz
       << " n=" << opt.num_users << "; doubling m or K shrinks it by [1.5, 3]";
    report.bound_formula = os.str();
  }

  RngStream root(seed);
  GradCounter gc;
  const auto run_combo = [&](int k, int m, std::uint64_t tag,
                             const std::string& series) {
    double acc = 0.0;
    const double lemma_bound =
        loss.lipschitz * loss.lipschitz *
        std::log(static_cast<double>(opt.num_users) * spec.dim * m) /
        (static_cast<double>(k) * m);
    for (int trial = 0; trial < opt.trials; ++trial) {
      RngStream tr = root.derive({tag, static_cast<std::uint64_t>(trial)});
      const UserDataset data =
          generate_dataset(spec, opt.num_users, m, tr.derive({1}).key());
      Vec full = Vec::Zero(domain.dim());
      std::vector<Vec> user_grads(opt.num_users);
      for (int i = 0; i < opt.num_users; ++i) {
        user_grads[i] = user_avg_gradient(loss, x_ref, data.user(i), gc);
        full += user_grads[i];
      }
      full /= static_cast<double>(opt.num_users);
      RngStream pick = tr.derive({2});
      Vec g = Vec::Zero(domain.dim());
      for (int j = 0; j < k; ++j)
        g += user_grads[pick.next_below(static_cast<std::uint64_t>(opt.num_users))];
      g /= static_cast<double>(k);
      const double sq = (g - full).squaredNorm();
      acc += sq;
      report.rows.push_back({series, static_cast<double>(m), trial, sq,
                             lemma_bound, true});
    }
    return acc / opt.trials;
  };

  bool ok = true;
  // m-scaling at fixed K
  std::vector<double> m_means;
  for (std::size_t i = 0; i < opt.m_values.size(); ++i)
    m_means.push_back(run_combo(opt.minibatch, opt.m_values[i],
                                0x100 + static_cast<std::uint64_t>(i),
                                "m_scaling"));
  for (std::size_t i = 0; i + 1 < opt.m_values.size(); ++i) {
    if (opt.m_values[i + 1] != 2 * opt.m_values[i]) continue;
    const double ratio = m_means[i] / m_means[i + 1];
    report.summary.emplace_back("m_ratio_" + std::to_string(opt.m_values[i]), ratio);
    ok = ok && ratio >= 1.5 && ratio <= 3.0;
  }
  // K-scaling at fixed m
  const int m0 = opt.m_values.front();
  const double var_k = run_combo(opt.minibatch, m0, 0x200, "k_scaling");
  const double var_2k = run_combo(2 * opt.minibatch, m0, 0x201, "k_scaling");
  const double k_ratio = var_k / var_2k;
  report.summary.emplace_back("k_ratio", k_ratio);
  ok = ok && k_ratio >= 1.5 && k_ratio <= 3.0;

  report.passed = ok;
  return report;
}

struct MechanismsOptions {
  long samples = 100000;
  int at_streams = 1000;
  int at_queries = 50;
  double at_gamma = 0.05;
  double epsilon = 1.0;
};

/// Moment checks for the Laplace/Gaussian samplers (3 standard errors at the
/// given sample count) plus the AboveThreshold accuracy event frequency.
inline AuditReport mechanisms_experiment(const MechanismsOptions& opt,
                                         std::uint64_t seed) {
  AuditReport report;
  report.name = "mechanisms";
  report.trials = static_cast<int>(opt.samples);
  report.bound_formula =
      "sample moments within 3 standard errors; AboveThreshold wrong-verdict "
      "frequency <= gamma";
  RngStream root(seed);
  bool ok = true;

  const auto check = [&](const std::string& series, double value,
                         double target, double tol) {
    const bool within = std::abs(value - target) <= tol;
    ok = ok && within;
    report.rows.push_back({series, target, 0, value, tol, within});
    report.summary.emplace_back(series, value);
  };

  {
    const double b = 2.0;
    NoiseSource src = NoiseSource::seeded(root.derive({1}));
    double sum = 0.0, sum2 = 0.0;
    for (long i = 0; i < opt.samples; ++i) {
      const double v = sample_laplace(b, src);
      sum += v;
      sum2 += v * v;
    }
    const double mean = sum / opt.samples;
    const double var = sum2 / opt.samples - mean * mean;
    // Var = 2b^2; Var of the variance estimate ~ (E X^4 - (E X^2)^2)/N = 20 b^4 / N.
    check("laplace_mean", mean, 0.0, 3.0 * std::sqrt(2.0 * b * b / opt.samples));
    check("laplace_var", var, 2.0 * b * b,
          3.0 * std::sqrt(20.0 * std::pow(b, 4.0) / opt.samples));
  }
  {
    NoiseSource src = NoiseSource::seeded(root.derive({2}));
    double sum = 0.0, sum2 = 0.0;
    for (long i = 0; i < opt.samples; ++i) {
      const double v = src.gaussian_vector(1.0, 1)[0];
      sum += v;
      sum2 += v * v;
    }
    const double mean = sum / opt.samples;
    const double var = sum2 / opt.samples - mean * mean;
    check("gaussian_mean", mean, 0.0, 3.0 / std::sqrt(static_cast<double>(opt.samples)));
    check("gaussian_var", var, 1.0, 3.0 * std::sqrt(2.0 / opt.samples));
  }
  {
    const double sigma = 3.0;
    const int d = 2;
    NoiseSource src = NoiseSource::seeded(root.derive({3}));
    double sum = 0.0;
    for (long i = 0; i < opt.samples; ++i)
      sum += src.gaussian_vector(sigma, d).squaredNorm();
    const double mean = sum / opt.samples;
    check("gaussian_norm2", mean, d * sigma * sigma,
          3.0 * std::sqrt(2.0 * d * std::pow(sigma, 4.0) / opt.samples));
  }
  {
    // Streams sitting 2*alpha below the threshold must essentially never
    // answer top within T queries.
    const double alpha = AboveThreshold::accuracy_alpha(opt.at_queries,
                                                        opt.at_gamma, opt.epsilon);
    const double threshold = 5.0;
    int wrong = 0;
    for (int s = 0; s < opt.at_streams; ++s) {
      NoiseSource src = NoiseSource::seeded(
          root.derive({4, static_cast<std::uint64_t>(s)}));
      AboveThreshold at(threshold, opt.epsilon, src);
      for (int t = 0; t < opt.at_queries; ++t) {
        if (at.query(threshold - 2.0 * alpha)) {
          ++wrong;
          break;
        }
      }
    }
    const double freq = static_cast<double>(wrong) / opt.at_streams;
    const bool within = freq <= opt.at_gamma;
    ok = ok && within;
    report.rows.push_back({"above_threshold_wrong", opt.at_gamma, 0, freq,
                           opt.at_gamma, within});
    report.summary.emplace_back("above_threshold_wrong", freq);
  }
  report.passed = ok;
  return report;
}

}  // namespace userdp

#endif  // USERDP_AUDIT_HPP
