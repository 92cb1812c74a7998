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

#ifndef USERDP_SMOOTHING_HPP
#define USERDP_SMOOTHING_HPP

#include <cmath>
#include <stdexcept>

#include "userdp/core.hpp"
#include "userdp/rng.hpp"

namespace userdp {

/// Uniform draw from the l2 ball of radius r: direction uniform on the
/// sphere, radius r * U^(1/d) (exact inverse-CDF radial method, O(d)).
inline Vec sample_uniform_ball(double r, int d, RngStream& rng) {
  if (r < 0.0)
    throw std::invalid_argument("sample_uniform_ball: negative radius");
  if (d < 1)
    throw std::invalid_argument("sample_uniform_ball: d must be >= 1");
  if (r == 0.0) return Vec::Zero(d);
  Vec dir(d);
  double norm = 0.0;
  do {
    for (int i = 0; i < d; ++i) dir[i] = rng.normal();
    norm = dir.norm();
  } while (norm == 0.0);
  const double radius = r * std::pow(rng.uniform_open(), 1.0 / d);
  return (radius / norm) * dir;
}

/// Convolution smoothing f_r = f * (uniform ball density of radius r).
/// Gradients are unbiased single-sample (or k-sample) estimates
/// (1/k) sum_j grad f(x + y_j, z); the result is L-Lipschitz and
/// (L sqrt(d) / r)-smooth, and f_r(x) <= f(x) <= f_r(x) + L r on the domain.
struct SmoothedLoss {
  LossModel base;
  BallDomain domain;
  double radius;               // r
  int samples_per_gradient;    // k
  double effective_smoothness;  // L sqrt(d) / r

  SmoothedLoss(LossModel base_loss, const BallDomain& dom, double r, int k = 1)
      : base(std::move(base_loss)),
        domain(dom),
        radius(r),
        samples_per_gradient(k),
        effective_smoothness(base.lipschitz * std::sqrt(dom.dim()) / r) {
    if (!(r > 0.0))
      throw std::invalid_argument("SmoothedLoss: radius must be positive");
    if (k < 1)
      throw std::invalid_argument("SmoothedLoss: need k >= 1 samples");
    if (base.domain_margin < r)
      throw DomainMarginError(
          "SmoothedLoss: base loss margin smaller than smoothing radius");
  }

  /// As a LossModel usable by the optimizers; grad_cost = k so gradient
  /// accounting counts base evaluations.
  LossModel as_loss_model() const {
    const LossModel base_copy = base;
    const BallDomain dom = domain;
    const double r = radius;
    const int k = samples_per_gradient;
    LossModel out;
    out.value_fn = base_copy.value_fn;
    out.grad_fn = [base_copy, dom, r, k](const Vec& x, const Vec& z,
                                         RngStream* rng) -> Vec {
      if (rng == nullptr)
        throw std::invalid_argument("smoothed gradient needs an RngStream");
      return smoothed_gradient_impl(base_copy, dom, r, k, x, z, *rng);
    };
    out.lipschitz = base_copy.lipschitz;
    out.smoothness = effective_smoothness;
    out.domain_margin = base_copy.domain_margin - r;
    out.grad_cost = k;
    return out;
  }

  static Vec smoothed_gradient_impl(const LossModel& base,
                                    const BallDomain& dom, double r, int k,
                                    const Vec& x, const Vec& z,
                                    RngStream& rng) {
    const double reach = dom.radius() + base.domain_margin;
    Vec sum = Vec::Zero(x.size());
    for (int j = 0; j < k; ++j) {
      const Vec y = sample_uniform_ball(r, static_cast<int>(x.size()), rng);
      const Vec q = x + y;
      if ((q - dom.center()).norm() > reach + 1e-9)
        throw DomainMarginError("smoothed_gradient: query outside base-loss domain");
      RngStream* unused = nullptr;
      sum += base.grad_fn(q, z, unused);
    }
    return sum / static_cast<double>(k);
  }
};

/// (1/k) sum grad f(x + y_j, z); unbiased for grad f_r(x, z). Increments the
/// counter by k.
inline Vec smoothed_gradient(const SmoothedLoss& s, const Vec& x, const Vec& z,
                             RngStream& rng, GradCounter& counter) {
  counter.add(s.samples_per_gradient);
  return SmoothedLoss::smoothed_gradient_impl(
      s.base, s.domain, s.radius, s.samples_per_gradient, x, z, rng);
}

/// Monte-Carlo estimate of f_r(x, z) = E_y f(x + y, z).
inline double smoothed_value_estimate(const SmoothedLoss& s, const Vec& x,
                                      const Vec& z, long k_samples,
                                      RngStream& rng) {
  if (k_samples < 1)
    throw std::invalid_argument("smoothed_value_estimate: need k >= 1");
  const double reach = s.domain.radius() + s.base.domain_margin;
  double sum = 0.0;
  for (long j = 0; j < k_samples; ++j) {
    const Vec y = sample_uniform_ball(s.radius, static_cast<int>(x.size()), rng);
    const Vec q = x + y;
    if ((q - s.domain.center()).norm() > reach + 1e-9)
      throw DomainMarginError("smoothed_value_estimate: query outside base-loss domain");
    sum += s.base.value(q, z);
  }
  return sum / static_cast<double>(k_samples);
}

}  // namespace userdp

#endif  // USERDP_SMOOTHING_HPP
