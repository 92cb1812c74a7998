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

#ifndef USERDP_OPTIMIZERS_HPP
#define USERDP_OPTIMIZERS_HPP

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "userdp/core.hpp"
#include "userdp/rng.hpp"

namespace userdp {

namespace rngpath {
// Purpose tags for derived streams.
inline constexpr std::uint64_t kSgdOrder = 0xA1;
inline constexpr std::uint64_t kSgdGrad = 0xA2;
}  // namespace rngpath

struct SgdConfig {
  double stepsize = 0.0;
  long steps = 0;  // must equal (users in view) * m
  Vec start;
};

/// One-pass projected SGD: pools all N*m items of the view, visits each
/// exactly once in a seeded random permutation, and returns the average of
/// the iterates x_1..x_T (x_0 excluded).
inline Vec one_pass_sgd(const LossModel& loss, const DatasetView& data,
                        const SgdConfig& cfg, const BallDomain& domain,
                        RngStream rng, GradCounter& counter) {
  if (data.num_users() == 0)
    throw std::invalid_argument("one_pass_sgd: empty data");
  const long n = data.num_users();
  const long m = data.items_per_user();
  const long total = n * m;
  if (cfg.steps != total)
    throw std::invalid_argument("one_pass_sgd: steps must equal users*m of the view");
  if (cfg.stepsize < 0.0)
    throw std::invalid_argument("one_pass_sgd: negative stepsize");

  RngStream order_rng = rng.derive({rngpath::kSgdOrder});
  RngStream grad_rng = rng.derive({rngpath::kSgdGrad});
  const auto perm = order_rng.permutation(static_cast<std::size_t>(total));

  Vec x = cfg.start;
  Vec sum = Vec::Zero(x.size());
  for (long t = 0; t < total; ++t) {
    const long idx = static_cast<long>(perm[t]);
    const Vec& z = data.user(static_cast<int>(idx / m))[idx % m];
    const Vec g = loss.gradient(x, z, counter, &grad_rng);
    x = domain.project(x - cfg.stepsize * g);
    sum += x;
  }
  return sum / static_cast<double>(total);
}

struct AcSaParams {
  double strong_convexity = 0.0;  // lambda
  double smoothness_bound = 0.0;  // Lambda = beta + 2*lambda
};

/// Two-sequence accelerated stochastic approximation (Ghadimi-Lan style) for
/// lambda-strongly-convex, Lambda-smooth objectives over a ball, with
/// alpha_t = 2/(t+1) and gamma_t = 4*Lambda/(t(t+1)). Gradients are queried
/// at the extrapolated point `query_point()`; `restart()` begins a new stage
/// from the current aggregate.
class AcSa {
 public:
  AcSa(const AcSaParams& params, Vec start, const BallDomain& domain)
      : lambda_(params.strong_convexity),
        big_lambda_(params.smoothness_bound),
        domain_(domain),
        x_(std::move(start)),
        x_ag_(x_),
        t_(1) {
    if (!(lambda_ > 0.0))
      throw std::invalid_argument("AcSa: strong convexity must be positive");
    if (big_lambda_ < lambda_)
      throw std::invalid_argument("AcSa: smoothness bound below strong convexity");
    update_query_point();
  }

  const Vec& query_point() const { return x_md_; }
  const Vec& aggregate() const { return x_ag_; }
  int iteration() const { return t_; }

  void step(const Vec& gradient_at_query) {
    const double a = alpha();
    const double g = gamma();
    const Vec unconstrained = (a * lambda_ * x_md_ +
                               ((1.0 - a) * lambda_ + g) * x_ -
                               a * gradient_at_query) /
                              (lambda_ + g);
    x_ = domain_.project(unconstrained);
    x_ag_ = a * x_ + (1.0 - a) * x_ag_;
    ++t_;
    update_query_point();
  }

  void restart() {
    x_ = x_ag_;
    t_ = 1;
    update_query_point();
  }

 private:
  double alpha() const { return 2.0 / (t_ + 1.0); }
  double gamma() const {
    return 4.0 * big_lambda_ / (static_cast<double>(t_) * (t_ + 1.0));
  }

  void update_query_point() {
    const double a = alpha();
    const double g = gamma();
    const double den = g + (1.0 - a * a) * lambda_;
    x_md_ = ((1.0 - a) * (lambda_ + g) * x_ag_ +
             a * ((1.0 - a) * lambda_ + g) * x_) /
            den;
  }

  double lambda_;
  double big_lambda_;
  BallDomain domain_;
  Vec x_, x_ag_, x_md_;
  int t_;
};

/// Restart period: N = ceil(4*sqrt(Lambda/lambda)), at least 1.
inline long ac_sa_stage_length(const AcSaParams& params) {
  if (!(params.strong_convexity > 0.0))
    throw std::invalid_argument("ac_sa_stage_length: lambda must be positive");
  const double n =
      std::ceil(4.0 * std::sqrt(params.smoothness_bound / params.strong_convexity));
  return std::max(1L, static_cast<long>(n));
}

/// One AC-SA stage: `steps` iterations, gradients from `oracle(query_point)`.
template <class Oracle>
Vec ac_sa_stage(const AcSaParams& params, Oracle&& oracle, long steps,
                const Vec& start, const BallDomain& domain) {
  if (steps < 1)
    throw std::invalid_argument("ac_sa_stage: steps must be >= 1");
  AcSa ac(params, start, domain);
  for (long t = 0; t < steps; ++t) ac.step(oracle(ac.query_point()));
  return ac.aggregate();
}

/// Multi-stage AC-SA: stages of constant length N = ceil(4*sqrt(Lambda/lambda)),
/// each restarted from the previous stage's aggregate. With total_steps <= N
/// this is exactly one ac_sa_stage call.
template <class Oracle>
Vec multi_stage_ac_sa(const AcSaParams& params, Oracle&& oracle,
                      long total_steps, const Vec& start,
                      const BallDomain& domain) {
  if (total_steps < 1)
    throw std::invalid_argument("multi_stage_ac_sa: total_steps must be >= 1");
  const long stage = ac_sa_stage_length(params);
  AcSa ac(params, start, domain);
  for (long t = 1; t <= total_steps; ++t) {
    ac.step(oracle(ac.query_point()));
    if (t % stage == 0 && t < total_steps) ac.restart();
  }
  return ac.aggregate();
}

}  // namespace userdp

#endif  // USERDP_OPTIMIZERS_HPP
