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

#ifndef USERDP_PROBLEMS_HPP
#define USERDP_PROBLEMS_HPP

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "userdp/core.hpp"
#include "userdp/rng.hpp"

namespace userdp {

enum class ProblemKind { kQuadraticMean, kGeometricMedian, kLogistic };

inline std::string problem_kind_name(ProblemKind k) {
  switch (k) {
    case ProblemKind::kQuadraticMean: return "quadratic_mean";
    case ProblemKind::kGeometricMedian: return "geometric_median";
    case ProblemKind::kLogistic: return "logistic";
  }
  return "?";
}

inline ProblemKind parse_problem_kind(const std::string& s) {
  if (s == "quadratic_mean") return ProblemKind::kQuadraticMean;
  if (s == "geometric_median") return ProblemKind::kGeometricMedian;
  if (s == "logistic") return ProblemKind::kLogistic;
  throw std::invalid_argument("unknown problem: " + s);
}

/// Data distribution: mean mu = mean_norm * (1,...,1)/sqrt(d), plus Gaussian
/// noise of the given scale rejection-sampled into a ball of radius trunc, so
/// item norms (and hence Lipschitz constants) are bounded exactly. For the
/// logistic problem, mu plays the role of the ground-truth weight vector and
/// the truncated Gaussians are the feature vectors.
struct DataLaw {
  double mean_norm = 0.5;
  double scale = 0.5;
  double trunc = 2.0;
};

namespace rngpath {
inline constexpr std::uint64_t kData = 0xD0;
inline constexpr std::uint64_t kUserAlt = 0xD1;
inline constexpr std::uint64_t kOracle = 0xD2;
}  // namespace rngpath

struct ProblemSpec {
  ProblemKind kind = ProblemKind::kQuadraticMean;
  int dim = 8;
  double radius = 1.0;  // domain ball radius (diameter R = 2 * radius)
  DataLaw law;

  void validate() const {
    if (dim < 1) throw std::invalid_argument("ProblemSpec: dim must be >= 1");
    if (!(radius > 0.0)) throw std::invalid_argument("ProblemSpec: radius > 0");
    if (law.scale < 0.0 || !(law.trunc > 0.0) || law.mean_norm < 0.0)
      throw std::invalid_argument("ProblemSpec: bad data law");
    if (law.mean_norm > radius)
      throw std::invalid_argument(
          "ProblemSpec: mean must lie inside the domain (mean_norm <= radius)");
  }

  BallDomain domain() const { return BallDomain::centered(dim, radius); }

  Vec mean() const {
    Vec mu = Vec::Ones(dim);
    mu *= law.mean_norm / std::sqrt(static_cast<double>(dim));
    return mu;
  }

  /// Bound on generated item norms.
  double item_bound() const {
    if (kind == ProblemKind::kLogistic) return law.trunc;
    return law.mean_norm + law.trunc;
  }

  /// Margin around the domain on which the loss stays defined (used by the
  /// smoothing wrapper). The quadratic's Lipschitz bound folds the margin in.
  double loss_margin() const {
    if (kind == ProblemKind::kQuadraticMean) return 0.25 * radius;
    return std::numeric_limits<double>::infinity();
  }

  double lipschitz() const {
    switch (kind) {
      case ProblemKind::kQuadraticMean:
        return radius + loss_margin() + item_bound();
      case ProblemKind::kGeometricMedian:
        return 1.0;
      case ProblemKind::kLogistic:
        return law.trunc;
    }
    return 0.0;
  }

  double smoothness() const {
    switch (kind) {
      case ProblemKind::kQuadraticMean:
        return 1.0;
      case ProblemKind::kGeometricMedian:
        return std::numeric_limits<double>::infinity();
      case ProblemKind::kLogistic:
        return 0.25 * law.trunc * law.trunc;
    }
    return 0.0;
  }

  LossModel make_loss() const {
    validate();
    LossModel loss;
    loss.lipschitz = lipschitz();
    loss.smoothness = smoothness();
    loss.domain_margin = loss_margin();
    switch (kind) {
      case ProblemKind::kQuadraticMean:
        loss.value_fn = [](const Vec& x, const Vec& z) {
          return 0.5 * (x - z).squaredNorm();
        };
        loss.grad_fn = [](const Vec& x, const Vec& z, RngStream*) -> Vec {
          return x - z;
        };
        break;
      case ProblemKind::kGeometricMedian:
        loss.value_fn = [](const Vec& x, const Vec& z) {
          return (x - z).norm();
        };
        loss.grad_fn = [](const Vec& x, const Vec& z, RngStream*) -> Vec {
          const Vec diff = x - z;
          const double n = diff.norm();
          if (n == 0.0) return Vec::Zero(x.size());  // subgradient at the kink
          return diff / n;
        };
        break;
      case ProblemKind::kLogistic: {
        const int d = dim;
        loss.value_fn = [d](const Vec& x, const Vec& z) {
          const double y = z[d];
          const double margin = -y * z.head(d).dot(x);
          // log(1 + exp(margin)), overflow-safe
          return margin > 30.0 ? margin : std::log1p(std::exp(margin));
        };
        loss.grad_fn = [d](const Vec& x, const Vec& z, RngStream*) -> Vec {
          const double y = z[d];
          const double margin = -y * z.head(d).dot(x);
          const double s = 1.0 / (1.0 + std::exp(-margin));
          return (-y * s) * z.head(d);
        };
        break;
      }
    }
    return loss;
  }

  std::string cache_key(long samples, std::uint64_t seed) const {
    std::ostringstream os;
    os << problem_kind_name(kind) << " d=" << dim << " radius=" << radius
       << " mean_norm=" << law.mean_norm << " scale=" << law.scale
       << " trunc=" << law.trunc << " samples=" << samples << " seed=" << seed;
    return os.str();
  }
};

namespace detail {

inline Vec truncated_gaussian(const ProblemSpec& spec, RngStream& rng) {
  Vec w(spec.dim);
  do {
    for (int i = 0; i < spec.dim; ++i) w[i] = spec.law.scale * rng.normal();
  } while (w.norm() > spec.law.trunc);
  return w;
}

inline Vec draw_item(const ProblemSpec& spec, const Vec& mu, RngStream& rng) {
  if (spec.kind == ProblemKind::kLogistic) {
    const Vec a = truncated_gaussian(spec, rng);
    const double p = 1.0 / (1.0 + std::exp(-a.dot(mu)));
    Vec item(spec.dim + 1);
    item.head(spec.dim) = a;
    item[spec.dim] = rng.uniform01() < p ? 1.0 : -1.0;
    return item;
  }
  return mu + truncated_gaussian(spec, rng);
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// n users of m i.i.d. items each; user i's items come from the substream
/// (seed, kData, i), so one user can be redrawn without touching the others.
inline UserDataset generate_dataset(const ProblemSpec& spec, int n, int m,
                                    std::uint64_t seed) {
  spec.validate();
  if (n < 1 || m < 1)
    throw std::invalid_argument("generate_dataset: need n, m >= 1");
  const Vec mu = spec.mean();
  RngStream root(seed);
  std::vector<std::vector<Vec>> users(n);
  for (int i = 0; i < n; ++i) {
    RngStream stream = root.derive({rngpath::kData, static_cast<std::uint64_t>(i)});
    users[i].reserve(m);
    for (int j = 0; j < m; ++j) users[i].push_back(detail::draw_item(spec, mu, stream));
  }
  return UserDataset(std::move(users));
}

/// Fresh i.i.d. replacement for one user's items (used by coupling audits).
inline std::vector<Vec> regenerate_user(const ProblemSpec& spec, int m,
                                        std::uint64_t seed, int user_index) {
  const Vec mu = spec.mean();
  RngStream stream = RngStream(seed).derive(
      {rngpath::kData, static_cast<std::uint64_t>(user_index), rngpath::kUserAlt});
  std::vector<Vec> items;
  items.reserve(m);
  for (int j = 0; j < m; ++j) items.push_back(detail::draw_item(spec, mu, stream));
  return items;
}

/// Ground-truth population risk F and its minimum F*. The quadratic problem
/// has a closed form (one cached Monte-Carlo constant for the second moment);
/// the others use a one-time 10^6-sample Monte-Carlo oracle whose minimum is
/// found by projected Weiszfeld / accelerated gradient descent. Results are
/// persisted as flat text records so reruns are comparable.
class RiskOracle {
 public:
  RiskOracle(const ProblemSpec& spec, std::string cache_path,
             long samples = 1000000, std::uint64_t seed = 20260801ULL)
      : spec_(spec), cache_path_(std::move(cache_path)), samples_(samples),
        seed_(seed), mu_(spec.mean()) {
    spec_.validate();
    if (!load_from_cache()) {
      compute();
      append_to_cache();
    }
  }

  double optimal_risk() const { return fstar_; }
  double ci() const { return ci_; }
  const Vec& minimizer() const { return argmin_; }

  double population_risk(const Vec& x) const {
    if (spec_.kind == ProblemKind::kQuadraticMean)
      return 0.5 * (x - mu_).squaredNorm() + fstar_;
    ensure_samples();
    return mc_risk(x);
  }

  /// Never negative beyond the oracle CI; exact for the quadratic.
  double excess_risk(const Vec& x) const {
    if (spec_.kind == ProblemKind::kQuadraticMean)
      return 0.5 * (x - mu_).squaredNorm();
    return population_risk(x) - fstar_;
  }

 private:
  bool load_from_cache() {
    std::ifstream in(cache_path_);
    if (!in) return false;
    const std::string key = spec_.cache_key(samples_, seed_);
    const std::uint64_t want = detail::fnv1a(key);
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string name;
      std::uint64_t hash = 0;
      double fstar = 0, ci = 0;
      long samples = 0;
      std::uint64_t seed = 0;
      std::string argmin_csv;
      if (!(ls >> name >> std::hex >> hash >> std::dec >> fstar >> ci >>
            samples >> seed >> argmin_csv))
        continue;
      if (hash != want) continue;
      fstar_ = fstar;
      ci_ = ci;
      argmin_ = Vec::Zero(spec_.dim);
      std::istringstream as(argmin_csv);
      std::string tok;
      int i = 0;
      while (std::getline(as, tok, ',') && i < spec_.dim)
        argmin_[i++] = std::stod(tok);
      return true;
    }
    return false;
  }

  void append_to_cache() const {
    if (cache_path_.empty()) return;
    std::ofstream out(cache_path_, std::ios::app);
    if (!out) return;
    const std::string key = spec_.cache_key(samples_, seed_);
    out << problem_kind_name(spec_.kind) << ' ' << std::hex
        << detail::fnv1a(key) << std::dec << ' ';
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", fstar_);
    out << buf << ' ';
    std::snprintf(buf, sizeof buf, "%.17g", ci_);
    out << buf << ' ' << samples_ << ' ' << seed_ << ' ';
    for (int i = 0; i < argmin_.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", argmin_[i]);
      out << (i ? "," : "") << buf;
    }
    out << '\n';
  }

  void compute() {
    switch (spec_.kind) {
      case ProblemKind::kQuadraticMean: {
        // F* = (1/2) E||z - mu||^2, streamed so no sample matrix is kept.
        RngStream stream = RngStream(seed_).derive({rngpath::kOracle});
        double acc = 0.0, acc2 = 0.0;
        for (long i = 0; i < samples_; ++i) {
          const double v =
              0.5 * detail::truncated_gaussian(spec_, stream).squaredNorm();
          acc += v;
          acc2 += v * v;
        }
        fstar_ = acc / samples_;
        ci_ = std::sqrt((acc2 / samples_ - fstar_ * fstar_) / samples_);
        argmin_ = mu_;
        break;
      }
      case ProblemKind::kGeometricMedian: {
        ensure_samples();
        argmin_ = weiszfeld();
        fstar_ = mc_risk(argmin_);
        ci_ = mc_risk_stderr(argmin_);
        break;
      }
      case ProblemKind::kLogistic: {
        ensure_samples();
        argmin_ = logistic_minimize();
        fstar_ = mc_risk(argmin_);
        ci_ = mc_risk_stderr(argmin_);
        break;
      }
    }
  }

  // Materializes the Monte-Carlo sample matrix (non-quadratic kinds only;
  // the quadratic path is closed-form and never needs it).
  void ensure_samples() const {
    std::call_once(sample_once_, [this] {
      RngStream stream = RngStream(seed_).derive({rngpath::kOracle});
      if (spec_.kind == ProblemKind::kLogistic) {
        items_.resize(spec_.dim, samples_);
        labels_.resize(samples_);
        for (long i = 0; i < samples_; ++i) {
          const Vec item = detail::draw_item(spec_, mu_, stream);
          items_.col(i) = item.head(spec_.dim);
          labels_[i] = item[spec_.dim];
        }
      } else {
        items_.resize(spec_.dim, samples_);
        for (long i = 0; i < samples_; ++i)
          items_.col(i) = detail::draw_item(spec_, mu_, stream);
      }
    });
  }

  double mc_risk(const Vec& x) const {
    if (spec_.kind == ProblemKind::kGeometricMedian)
      return (items_.colwise() - x).colwise().norm().mean();
    // logistic
    const Eigen::ArrayXd margins =
        -(labels_.array()) * (items_.transpose() * x).array();
    return margins.unaryExpr([](double m) {
      return m > 30.0 ? m : std::log1p(std::exp(m));
    }).mean();
  }

  double mc_risk_stderr(const Vec& x) const {
    Eigen::ArrayXd vals;
    if (spec_.kind == ProblemKind::kGeometricMedian) {
      vals = (items_.colwise() - x).colwise().norm().transpose().array();
    } else {
      vals = (-(labels_.array()) * (items_.transpose() * x).array())
                 .unaryExpr([](double m) {
                   return m > 30.0 ? m : std::log1p(std::exp(m));
                 });
    }
    const double mean = vals.mean();
    const double var = (vals - mean).square().sum() / (vals.size() - 1);
    return std::sqrt(var / vals.size());
  }

  Vec weiszfeld() const {
    const BallDomain dom = spec_.domain();
    Vec x = mu_;
    for (int iter = 0; iter < 300; ++iter) {
      const Eigen::ArrayXd dists =
          (items_.colwise() - x).colwise().norm().transpose().array().max(1e-12);
      const Eigen::VectorXd inv = dists.inverse().matrix();
      const Vec next = dom.project((items_ * inv) / inv.sum());
      const double move = (next - x).norm();
      x = next;
      if (move < 1e-13) break;
    }
    return x;
  }

  Vec logistic_minimize() const {
    const BallDomain dom = spec_.domain();
    const double beta = std::max(spec_.smoothness(), 1e-8);
    const double step = 1.0 / beta;
    Vec x = Vec::Zero(spec_.dim);
    Vec y = x;
    double t = 1.0;
    for (int iter = 0; iter < 400; ++iter) {
      const Eigen::ArrayXd margins =
          -(labels_.array()) * (items_.transpose() * y).array();
      const Eigen::ArrayXd s = 1.0 / (1.0 + (-margins).exp());
      const Vec grad =
          items_ * (-(labels_.array()) * s).matrix() / static_cast<double>(samples_);
      const Vec xn = dom.project(y - step * grad);
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = xn + ((t - 1.0) / tn) * (xn - x);
      x = xn;
      t = tn;
    }
    return x;
  }

  ProblemSpec spec_;
  std::string cache_path_;
  long samples_;
  std::uint64_t seed_;
  Vec mu_;
  double fstar_ = 0.0;
  double ci_ = 0.0;
  Vec argmin_;

  mutable std::once_flag sample_once_;
  mutable Eigen::MatrixXd items_;
  mutable Eigen::VectorXd labels_;
};

}  // namespace userdp

#endif  // USERDP_PROBLEMS_HPP
