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

#ifndef USERDP_MECHANISMS_HPP
#define USERDP_MECHANISMS_HPP

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "userdp/core.hpp"
#include "userdp/rng.hpp"

namespace userdp {

/// DP noise tap. In disabled mode every sample is exactly zero (test hook);
/// in seeded mode samples follow the requested distribution. Single consumer;
/// parallel callers must split streams by path.
class NoiseSource {
 public:
  static NoiseSource disabled() { return NoiseSource(); }
  static NoiseSource seeded(RngStream stream) { return NoiseSource(stream); }

  bool is_disabled() const { return disabled_; }

  double laplace(double scale) {
    if (!(scale > 0.0))
      throw std::invalid_argument("NoiseSource::laplace: invalid scale");
    if (disabled_) return 0.0;
    return stream_.laplace(scale);
  }

  Vec gaussian_vector(double sigma, int d) {
    if (!(sigma > 0.0))
      throw std::invalid_argument("NoiseSource::gaussian_vector: invalid scale");
    if (d < 1)
      throw std::invalid_argument("NoiseSource::gaussian_vector: d must be >= 1");
    if (disabled_) return Vec::Zero(d);
    Vec out(d);
    for (int i = 0; i < d; ++i) out[i] = sigma * stream_.normal();
    return out;
  }

 private:
  NoiseSource() : disabled_(true), stream_(0) {}
  explicit NoiseSource(RngStream stream) : disabled_(false), stream_(stream) {}

  bool disabled_;
  RngStream stream_;
};

inline double sample_laplace(double scale, NoiseSource& src) {
  return src.laplace(scale);
}

inline Vec sample_gaussian_vector(double sigma, int d, NoiseSource& src) {
  return src.gaussian_vector(sigma, d);
}

/// Concentration score s(tau) = (1/C) * #{(j, j') : ||x_j - x_j'|| <= tau},
/// ordered pairs, diagonal included. Range [1, C].
inline double concentration_score(std::span<const Vec> points, double tau) {
  if (points.empty())
    throw std::invalid_argument("concentration_score: empty input");
  if (!(tau > 0.0))
    throw std::invalid_argument("concentration_score: tau must be positive");
  const std::size_t c = points.size();
  long count = static_cast<long>(c);  // diagonal pairs
  for (std::size_t j = 0; j < c; ++j)
    for (std::size_t k = j + 1; k < c; ++k)
      if ((points[j] - points[k]).norm() <= tau) count += 2;
  return static_cast<double>(count) / static_cast<double>(c);
}

/// Piecewise inclusion probability: 0 below C/2, 1 at or above 2C/3, linear
/// in between. h and C are integer-valued in every caller, so the branch
/// comparisons (2h vs C, 3h vs 2C) are exact in double and the breakpoints
/// cannot flip for degenerate C < 6.
inline double inclusion_probability(double h, int c) {
  if (c < 1) throw std::invalid_argument("inclusion_probability: C must be >= 1");
  const double cd = static_cast<double>(c);
  if (2.0 * h < cd) return 0.0;
  if (3.0 * h >= 2.0 * cd) return 1.0;
  const double p = (2.0 * h - cd) * 3.0 / cd;  // (h - C/2) / (C/6)
  return std::min(1.0, std::max(0.0, p));
}

/// Outcome of the score gate plus the per-point outlier filter.
struct ConcentrationReport {
  double raw_score = 0.0;
  double noisy_score = 0.0;
  double threshold = -std::numeric_limits<double>::infinity();
  bool passed = true;
  std::vector<double> per_point_scores;  // h_j
  std::vector<double> inclusion_probs;   // p_j
  std::vector<int> selected;             // indices into the input
};

/// Per-point scores h_j = #{j' : ||x_j - x_j'|| <= 2*tau} and independent
/// inclusion with probability inclusion_probability(h_j, C). raw_score is
/// s(tau); gate fields (noisy_score/threshold/passed) are left for the caller
/// to fill. When all pairwise distances are <= tau, every point is selected
/// with probability one.
inline ConcentrationReport filter_outliers(std::span<const Vec> points,
                                           double tau, RngStream& rng) {
  if (points.empty())
    throw std::invalid_argument("filter_outliers: empty input");
  const int c = static_cast<int>(points.size());
  ConcentrationReport report;
  report.raw_score = concentration_score(points, tau);
  report.per_point_scores.resize(c);
  report.inclusion_probs.resize(c);
  for (int j = 0; j < c; ++j) {
    long h = 0;
    for (int k = 0; k < c; ++k)
      if ((points[j] - points[k]).norm() <= 2.0 * tau) ++h;
    report.per_point_scores[j] = static_cast<double>(h);
    report.inclusion_probs[j] =
        inclusion_probability(static_cast<double>(h), c);
  }
  for (int j = 0; j < c; ++j) {
    const double p = report.inclusion_probs[j];
    const double u = rng.uniform01();
    if (p >= 1.0 || u < p) report.selected.push_back(j);
  }
  return report;
}

/// Sparse-vector threshold test. The noisy threshold is drawn once at
/// construction; each query gets fresh noise. Default scales are the
/// Appendix-A listing's Lap(2/eps) / Lap(4/eps) for sensitivity-1 queries;
/// Algorithm 2's inline variant passes its own scales and keeps querying
/// after a top answer.
class AboveThreshold {
 public:
  AboveThreshold(double threshold, double epsilon, NoiseSource& src)
      : AboveThreshold(threshold, 2.0 / check_eps(epsilon), 4.0 / epsilon, src) {}

  AboveThreshold(double threshold, double threshold_noise_scale,
                 double query_noise_scale, NoiseSource& src)
      : query_scale_(query_noise_scale), src_(&src) {
    noisy_threshold_ = threshold + src.laplace(threshold_noise_scale);
  }

  /// The query with fresh noise attached.
  double noised(double q) { return q + src_->laplace(query_scale_); }

  /// True = top (query clears the noisy threshold).
  bool query(double q) { return noised(q) >= noisy_threshold_; }

  double noisy_threshold() const { return noisy_threshold_; }

  /// Accuracy width from the classic guarantee: alpha = 8 log(2T/gamma) / eps.
  static double accuracy_alpha(int num_queries, double gamma, double epsilon) {
    return 8.0 * std::log(2.0 * num_queries / gamma) / epsilon;
  }

 private:
  static double check_eps(double epsilon) {
    if (!(epsilon > 0.0))
      throw std::invalid_argument("AboveThreshold: epsilon must be positive");
    return epsilon;
  }

  double noisy_threshold_ = 0.0;
  double query_scale_ = 0.0;
  NoiseSource* src_;
};

/// Runs the Appendix-A listing over a query sequence: bottom answers until
/// the first top, then halt. The returned vector covers the answered prefix.
inline std::vector<bool> above_threshold_sweep(std::span<const double> queries,
                                               double threshold, double epsilon,
                                               NoiseSource& src) {
  AboveThreshold at(threshold, epsilon, src);
  std::vector<bool> verdicts;
  verdicts.reserve(queries.size());
  for (double q : queries) {
    const bool top = at.query(q);
    verdicts.push_back(top);
    if (top) break;
  }
  return verdicts;
}

}  // namespace userdp

#endif  // USERDP_MECHANISMS_HPP
