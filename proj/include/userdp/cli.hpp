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

#ifndef USERDP_CLI_HPP
#define USERDP_CLI_HPP

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "userdp/algorithms.hpp"
#include "userdp/audit.hpp"
#include "userdp/config.hpp"
#include "userdp/parallel.hpp"
#include "userdp/problems.hpp"

namespace userdp {

// Exit codes: 0 success, 1 config/usage error, 2 infeasible schedule,
// 3 audit bound failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitInfeasible = 2;
inline constexpr int kExitAuditFailure = 3;

inline constexpr const char* kCsvVersionLine = "userdp-sco-csv v1";
inline constexpr const char* kCsvColumns =
    "algorithm,n,m,d,eps,delta,kappa,seed,excess_risk,grad_evals,halted,"
    "halt_phase,wall_time";

struct CliOptions {
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::optional<int> jobs;
  std::optional<std::string> mode;
};

struct ResultRow {
  std::string algorithm;
  int n = 0, m = 0, d = 0;
  double eps = 0, delta = 0, kappa = 0;
  std::uint64_t seed = 0;
  double excess_risk = 0;
  long grad_evals = 0;
  bool halted = false;
  std::optional<int> halt_phase;
  double wall_time = 0;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string row_to_csv(const ResultRow& r) {
  std::ostringstream os;
  os << r.algorithm << ',' << r.n << ',' << r.m << ',' << r.d << ','
     << fmt_double(r.eps) << ',' << fmt_double(r.delta) << ','
     << fmt_double(r.kappa) << ',' << r.seed << ','
     << fmt_double(r.excess_risk) << ',' << r.grad_evals << ','
     << (r.halted ? 1 : 0) << ','
     << (r.halt_phase ? std::to_string(*r.halt_phase) : std::string()) << ',';
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", r.wall_time);
  os << buf;
  return os.str();
}

inline ProblemSpec spec_from_config(const ExperimentConfig& cfg) {
  ProblemSpec spec;
  spec.kind = parse_problem_kind(cfg.problem);
  spec.dim = cfg.d;
  spec.radius = cfg.radius;
  spec.law = DataLaw{cfg.mean_norm, cfg.scale, cfg.trunc};
  spec.validate();
  return spec;
}

inline PrivacyParams privacy_from_config(const ExperimentConfig& cfg) {
  PrivacyParams priv;
  priv.epsilon = cfg.epsilon;
  priv.delta = cfg.delta;
  priv.constant_scale = cfg.kappa;
  priv.mode = cfg.mode == "theory" ? ConstantMode::kTheory
                                   : ConstantMode::kPractical;
  priv.validate();
  return priv;
}

/// Cross product of the sweep axes applied over the base config.
inline std::vector<std::pair<std::string, ExperimentConfig>> expand_sweep(
    const ExperimentConfig& base) {
  std::vector<std::pair<std::string, ExperimentConfig>> points;
  std::vector<std::size_t> index(base.sweep.size(), 0);
  for (;;) {
    ExperimentConfig cfg = base;
    std::ostringstream label;
    for (std::size_t a = 0; a < base.sweep.size(); ++a) {
      const auto& [key, values] = base.sweep[a];
      cfg.set_scalar(key, values[index[a]]);
      if (a) label << ' ';
      label << key << '=' << values[index[a]];
    }
    points.emplace_back(label.str(), cfg);
    std::size_t a = base.sweep.size();
    while (a > 0) {
      --a;
      if (++index[a] < base.sweep[a].second.size()) break;
      index[a] = 0;
      if (a == 0) return points;
    }
    if (base.sweep.empty()) return points;
  }
}

struct PreparedPoint {
  ExperimentConfig cfg;
  std::string label;
  ProblemSpec spec;
  LossModel loss;       // loss actually optimized (smoothed for nonsmooth runs)
  PrivacyParams priv;
  std::optional<PhaseScheduleAlg1> sched1;
  std::optional<PhaseScheduleAlg3> sched3;
  std::shared_ptr<RiskOracle> oracle;
};

inline PreparedPoint prepare_point(const std::string& label,
                                   const ExperimentConfig& cfg,
                                   const std::string& oracle_cache,
                                   std::map<std::string, std::shared_ptr<RiskOracle>>&
                                       oracle_registry) {
  PreparedPoint pt;
  pt.cfg = cfg;
  pt.label = label;
  pt.spec = spec_from_config(cfg);
  pt.priv = privacy_from_config(cfg);
  const BallDomain domain = pt.spec.domain();
  const LossModel base_loss = pt.spec.make_loss();

  Alg3Options opt3;
  opt3.p = cfg.p;
  opt3.q = cfg.q;
  opt3.lambda = cfg.lambda;
  opt3.c_tau = cfg.c_tau;
  opt3.c_t = cfg.c_t;

  if (cfg.algorithm == "alg1") {
    Alg1Options opt1;
    opt1.p = cfg.p;
    opt1.q = cfg.q;
    opt1.stepsize = cfg.eta;
    pt.loss = base_loss;
    pt.sched1 = schedule_alg1(cfg.n, cfg.m, cfg.d, pt.priv, base_loss.lipschitz,
                              domain.diameter(), opt1);
  } else if (cfg.algorithm == "alg3") {
    pt.loss = base_loss;
    pt.sched3 = schedule_alg3(cfg.n, cfg.m, cfg.d, pt.priv, base_loss.lipschitz,
                              domain.diameter(), base_loss.smoothness, opt3);
  } else if (cfg.algorithm == "alg3_nonsmooth") {
    const double r = std::sqrt(static_cast<double>(cfg.d)) * domain.diameter() /
                     (pt.priv.epsilon * cfg.n * std::sqrt(static_cast<double>(cfg.m)));
    if (base_loss.domain_margin < r)
      throw DomainMarginError("loss not defined on the expanded domain");
    SmoothedLoss smoothed(base_loss, domain, r, cfg.k);
    pt.loss = smoothed.as_loss_model();
    opt3.nonsmooth_iters = true;
    pt.sched3 = schedule_alg3(cfg.n, cfg.m, cfg.d, pt.priv, pt.loss.lipschitz,
                              domain.diameter(), pt.loss.smoothness, opt3);
  } else {
    throw std::invalid_argument("unknown algorithm: " + cfg.algorithm);
  }

  const std::string key =
      pt.spec.cache_key(cfg.oracle_samples, 20260801ULL);
  auto it = oracle_registry.find(key);
  if (it == oracle_registry.end()) {
    it = oracle_registry
             .emplace(key, std::make_shared<RiskOracle>(pt.spec, oracle_cache,
                                                        cfg.oracle_samples))
             .first;
  }
  pt.oracle = it->second;
  return pt;
}

inline ResultRow run_point(const PreparedPoint& pt, std::uint64_t seed,
                           int jobs) {
  const ExperimentConfig& cfg = pt.cfg;
  const BallDomain domain = pt.spec.domain();
  const UserDataset data = generate_dataset(pt.spec, cfg.n, cfg.m, seed);
  RunReport report;
  if (pt.sched1) {
    report = phased_sgd(data, pt.loss, domain, pt.priv, *pt.sched1, seed,
                        NoiseMode::kSeeded, jobs);
  } else {
    report = accelerated_phased_erm(data, pt.loss, domain, pt.priv, *pt.sched3,
                                    seed, NoiseMode::kSeeded, jobs);
  }
  ResultRow row;
  row.algorithm = cfg.algorithm;
  row.n = cfg.n;
  row.m = cfg.m;
  row.d = cfg.d;
  row.eps = cfg.epsilon;
  row.delta = cfg.delta;
  row.kappa = cfg.kappa;
  row.seed = seed;
  row.excess_risk = pt.oracle->excess_risk(report.output);
  row.grad_evals = report.grad_evals;
  row.halted = report.halted;
  row.halt_phase = report.halt_phase;
  row.wall_time = report.wall_time;
  return row;
}

}  // namespace detail

inline int cmd_run(ExperimentConfig cfg, const CliOptions& cli,
                   std::ostream& log = std::cout) {
  if (cli.seed) cfg.seeds = {*cli.seed};
  if (cli.jobs) cfg.jobs = *cli.jobs;
  if (cli.mode) cfg.mode = *cli.mode;

  std::filesystem::create_directories(cli.out_dir);
  const std::string out_path =
      (std::filesystem::path(cli.out_dir) / cfg.out).string();
  const std::string cache_path =
      (std::filesystem::path(cli.out_dir) / "oracle_cache.txt").string();

  const auto points = detail::expand_sweep(cfg);
  const std::size_t total_runs = points.size() * cfg.seeds.size();
  log << "sweep: " << points.size() << " point(s) x " << cfg.seeds.size()
      << " seed(s) = " << total_runs << " run(s)\n";

  // Validate every schedule (and build oracles) before touching any data.
  std::map<std::string, std::shared_ptr<RiskOracle>> oracles;
  std::vector<detail::PreparedPoint> prepared;
  prepared.reserve(points.size());
  try {
    for (const auto& [label, point_cfg] : points)
      prepared.push_back(
          detail::prepare_point(label, point_cfg, cache_path, oracles));
  } catch (const InfeasibleScheduleError& e) {
    log << "infeasible schedule: " << e.what() << "\n";
    return kExitInfeasible;
  }
  for (const auto& pt : prepared) {
    const auto& warnings =
        pt.sched1 ? pt.sched1->warnings : pt.sched3->warnings;
    for (const auto& w : warnings)
      log << "warning [" << (pt.label.empty() ? "base" : pt.label) << "]: "
          << w << "\n";
  }

  std::vector<ResultRow> rows(total_runs);
  const int pool_jobs = std::max(1, cfg.jobs);
  const int inner_jobs = total_runs == 1 ? pool_jobs : 1;
  parallel_for(pool_jobs, static_cast<int>(total_runs), [&](int task) {
    const std::size_t pi = task / cfg.seeds.size();
    const std::size_t si = task % cfg.seeds.size();
    rows[task] = detail::run_point(prepared[pi], cfg.seeds[si], inner_jobs);
  });

  std::ofstream out(out_path);
  if (!out) {
    log << "cannot write " << out_path << "\n";
    return kExitConfig;
  }
  out << kCsvVersionLine << "\n# config-begin\n";
  std::istringstream raw(cfg.raw_text);
  std::string line;
  while (std::getline(raw, line)) out << "# " << line << "\n";
  out << "# config-end\n" << kCsvColumns << "\n";
  for (const auto& row : rows) out << detail::row_to_csv(row) << "\n";
  out.close();

  log << "wrote " << rows.size() << " row(s) to " << out_path << "\n";
  log << "point  runs  median_excess  max_grad_evals  halted\n";
  for (std::size_t pi = 0; pi < prepared.size(); ++pi) {
    std::vector<double> excess;
    long max_grad = 0;
    int halted = 0;
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
      const auto& r = rows[pi * cfg.seeds.size() + si];
      excess.push_back(r.excess_risk);
      max_grad = std::max(max_grad, r.grad_evals);
      halted += r.halted;
    }
    log << (prepared[pi].label.empty() ? "base" : prepared[pi].label) << "  "
        << cfg.seeds.size() << "  " << detail::median_of(excess) << "  "
        << max_grad << "  " << halted << "\n";
  }
  return kExitOk;
}

inline int cmd_audit(const std::string& name,
                     const std::map<std::string, double>& overrides,
                     const CliOptions& cli, std::ostream& log = std::cout) {
  const std::uint64_t seed = cli.seed.value_or(1234);
  const auto get = [&](const std::string& key, double fallback) {
    auto it = overrides.find(key);
    return it == overrides.end() ? fallback : it->second;
  };
  for (const auto& [key, value] : overrides) {
    (void)value;
    static const char* known[] = {"eta",     "T",       "trials",  "zeta",
                                  "n",       "m",       "d",       "tau_scale",
                                  "epsilon", "kappa",   "K",       "samples",
                                  "streams", "queries", "gamma",   "delta",
                                  "scale",   "trunc",   "mean_norm"};
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) {
      log << "unknown override: " << key << "\n";
      return kExitConfig;
    }
  }

  AuditReport report;
  try {
  if (name == "stability") {
    ProblemSpec spec;
    spec.dim = static_cast<int>(get("d", 8));
    spec.law = DataLaw{get("mean_norm", 0.5), get("scale", 0.5), get("trunc", 2.0)};
    StabilityOptions opt;
    opt.eta = get("eta", 0.001);
    const long t0 = static_cast<long>(get("T", 64));
    opt.t_values = {t0, 4 * t0};
    opt.trials = static_cast<int>(get("trials", 200));
    opt.zeta = get("zeta", 0.05);
    report = stability_experiment(spec, spec.make_loss(), opt, seed);
  } else if (name == "sensitivity") {
    ProblemSpec spec;
    spec.dim = static_cast<int>(get("d", 4));
    spec.law = DataLaw{get("mean_norm", 0.5), get("scale", 0.5), get("trunc", 2.0)};
    PrivacyParams priv;
    priv.epsilon = get("epsilon", 2.0);
    priv.delta = get("delta", 1e-5);
    priv.constant_scale = get("kappa", 1.0);
    priv.mode = cli.mode.value_or("practical") == "theory"
                    ? ConstantMode::kTheory
                    : ConstantMode::kPractical;
    const int n = static_cast<int>(get("n", 512));
    const int m = static_cast<int>(get("m", 8));
    const LossModel loss = spec.make_loss();
    const auto sched = schedule_alg1(n, m, spec.dim, priv, loss.lipschitz,
                                     spec.domain().diameter());
    SensitivityOptions opt;
    opt.trials = static_cast<int>(get("trials", 500));
    opt.tau_scale = get("tau_scale", 1.0);
    report = sensitivity_experiment(spec, loss, priv, sched, opt, seed);
  } else if (name == "variance") {
    ProblemSpec spec;
    spec.dim = static_cast<int>(get("d", 8));
    spec.law = DataLaw{get("mean_norm", 0.5), get("scale", 0.5), get("trunc", 2.0)};
    VarianceOptions opt;
    opt.minibatch = static_cast<int>(get("K", 32));
    const int m0 = static_cast<int>(get("m", 4));
    opt.m_values = {m0, 2 * m0};
    opt.trials = static_cast<int>(get("trials", 1000));
    opt.num_users = static_cast<int>(get("n", 256));
    report = variance_experiment(spec, spec.make_loss(), opt, seed);
  } else if (name == "mechanisms") {
    MechanismsOptions opt;
    opt.samples = static_cast<long>(get("samples", 100000));
    opt.at_streams = static_cast<int>(get("streams", 1000));
    opt.at_queries = static_cast<int>(get("queries", 50));
    opt.at_gamma = get("gamma", 0.05);
    opt.epsilon = get("epsilon", 1.0);
    report = mechanisms_experiment(opt, seed);
  } else {
    log << "unknown audit: " << name
        << " (expected stability|sensitivity|variance|mechanisms)\n";
    return kExitConfig;
  }
  } catch (const InfeasibleScheduleError& e) {
    log << "infeasible schedule: " << e.what() << "\n";
    return kExitInfeasible;
  }

  std::filesystem::create_directories(cli.out_dir);
  const std::string csv_path =
      (std::filesystem::path(cli.out_dir) / ("audit_" + name + ".csv")).string();
  write_audit_csv(report, csv_path);
  log << "audit " << name << ": " << (report.passed ? "PASS" : "FAIL") << "\n";
  log << "bound: " << report.bound_formula << "\n";
  for (const auto& [k, v] : report.summary) log << "  " << k << " = " << v << "\n";
  log << "wrote " << csv_path << "\n";
  return report.passed ? kExitOk : kExitAuditFailure;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

namespace detail {

struct PointKey {
  std::string algorithm;
  int n, m, d;
  double eps, delta, kappa;

  std::string label() const {
    std::ostringstream os;
    os << algorithm << " n=" << n << " m=" << m << " d=" << d << " eps=" << eps
       << " delta=" << delta << " kappa=" << kappa;
    return os.str();
  }
  bool operator<(const PointKey& o) const {
    return label() < o.label();
  }
};

inline bool read_results_csv(const std::string& path,
                             std::vector<ResultRow>& rows, std::string& error) {
  std::ifstream in(path);
  if (!in) {
    error = "cannot open " + path;
    return false;
  }
  std::string line;
  if (!std::getline(in, line) || line != kCsvVersionLine) {
    error = path + ": schema mismatch (missing '" +
            std::string(kCsvVersionLine) + "')";
    return false;
  }
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != kCsvColumns) {
        error = path + ": schema mismatch (unexpected column header)";
        return false;
      }
      saw_header = true;
      continue;
    }
    std::vector<std::string> f;
    std::string tok;
    std::istringstream ls(line);
    while (std::getline(ls, tok, ',')) f.push_back(tok);
    while (f.size() < 13) f.push_back("");
    try {
      ResultRow r;
      r.algorithm = f[0];
      r.n = std::stoi(f[1]);
      r.m = std::stoi(f[2]);
      r.d = std::stoi(f[3]);
      r.eps = std::stod(f[4]);
      r.delta = std::stod(f[5]);
      r.kappa = std::stod(f[6]);
      r.seed = std::stoull(f[7]);
      r.excess_risk = std::stod(f[8]);
      r.grad_evals = std::stol(f[9]);
      r.halted = f[10] == "1";
      if (!f[11].empty()) r.halt_phase = std::stoi(f[11]);
      r.wall_time = f[12].empty() ? 0.0 : std::stod(f[12]);
      rows.push_back(r);
    } catch (const std::exception&) {
      error = path + ": schema mismatch (unparsable row: " + line + ")";
      return false;
    }
  }
  return true;
}

inline double risk_term1(const PointKey& k) {
  return 1.0 / std::sqrt(static_cast<double>(k.n) * k.m);
}
inline double risk_term2(const PointKey& k) {
  return std::sqrt(static_cast<double>(k.d)) /
         (k.eps * k.n * std::sqrt(static_cast<double>(k.m)));
}

}  // namespace detail

inline int cmd_report(const std::vector<std::string>& paths,
                      std::ostream& log = std::cout) {
  std::vector<ResultRow> rows;
  for (const auto& p : paths) {
    std::string error;
    if (!detail::read_results_csv(p, rows, error)) {
      log << error << "\n";
      return kExitConfig;
    }
  }
  if (rows.empty()) {
    log << "no data\n";
    return kExitOk;
  }

  std::map<detail::PointKey, std::vector<ResultRow>> groups;
  for (const auto& r : rows) {
    detail::PointKey k{r.algorithm, r.n, r.m, r.d, r.eps, r.delta, r.kappa};
    groups[k].push_back(r);
  }

  log << "point | runs | excess_risk median [q25, q75] | grad_evals max | halted\n";
  for (const auto& [key, rs] : groups) {
    std::vector<double> ex;
    long max_grad = 0;
    int halted = 0;
    for (const auto& r : rs) {
      ex.push_back(r.excess_risk);
      max_grad = std::max(max_grad, r.grad_evals);
      halted += r.halted;
    }
    log << key.label() << " | " << rs.size() << " | " << detail::median_of(ex)
        << " [" << detail::quantile_of(ex, 0.25) << ", "
        << detail::quantile_of(ex, 0.75) << "] | " << max_grad << " | "
        << halted << "\n";
  }

  // Scaling ratios along single-axis pairs, next to the predicted exponents
  // risk ~ (nm)^(-1/2) + sqrt(d)/(eps n sqrt(m)).
  std::vector<detail::PointKey> keys;
  for (const auto& [key, rs] : groups) keys.push_back(key);
  const auto median_excess = [&](const detail::PointKey& k) {
    std::vector<double> ex;
    for (const auto& r : groups[k]) ex.push_back(r.excess_risk);
    return detail::median_of(ex);
  };
  const auto max_grad_of = [&](const detail::PointKey& k) {
    long g = 0;
    for (const auto& r : groups[k]) g = std::max(g, r.grad_evals);
    return g;
  };
  for (std::size_t i = 0; i < keys.size(); ++i) {
    for (std::size_t j = 0; j < keys.size(); ++j) {
      if (i == j) continue;
      const auto& a = keys[i];
      const auto& b = keys[j];
      if (a.algorithm != b.algorithm || a.delta != b.delta || a.kappa != b.kappa)
        continue;
      const bool n_diff = a.n != b.n, m_diff = a.m != b.m, e_diff = a.eps != b.eps;
      if (n_diff + m_diff + e_diff != 1 || a.d != b.d) continue;
      std::string axis = n_diff ? "n" : (m_diff ? "m" : "eps");
      const double va = n_diff ? a.n : (m_diff ? a.m : a.eps);
      const double vb = n_diff ? b.n : (m_diff ? b.m : b.eps);
      if (!(vb > va)) continue;
      const double measured = median_excess(a) / std::max(median_excess(b), 1e-300);
      log << "risk scaling vs " << axis << " (" << va << " -> " << vb
          << "): measured ratio " << measured << "; predicted term1 "
          << detail::risk_term1(a) / detail::risk_term1(b) << ", term2 "
          << detail::risk_term2(a) / detail::risk_term2(b) << "\n";
      if (!e_diff) {
        log << "grad_evals scaling vs " << axis << ": measured "
            << static_cast<double>(max_grad_of(b)) /
                   std::max<long>(max_grad_of(a), 1)
            << "x\n";
      }
    }
  }

  // Algorithm 1 budget identity: grad_evals <= nm on every run.
  double worst = 0.0;
  bool any_alg1 = false;
  for (const auto& r : rows)
    if (r.algorithm == "alg1") {
      any_alg1 = true;
      worst = std::max(worst, static_cast<double>(r.grad_evals) /
                                  (static_cast<double>(r.n) * r.m));
    }
  if (any_alg1)
    log << "alg1 grad_evals/(nm) max = " << worst
        << (worst <= 1.0 ? " (<= 1)" : " (BUDGET VIOLATION)") << "\n";
  return kExitOk;
}

}  // namespace userdp

#endif  // USERDP_CLI_HPP
