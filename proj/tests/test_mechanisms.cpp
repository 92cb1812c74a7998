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

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "userdp/mechanisms.hpp"

using namespace userdp;

namespace {

Vec make_vec(std::initializer_list<double> vals) {
  Vec v(static_cast<long>(vals.size()));
  long i = 0;
  for (double x : vals) v[i++] = x;
  return v;
}

std::vector<Vec> constant_points(int c, const Vec& p) {
  return std::vector<Vec>(c, p);
}

}  // namespace

TEST_CASE("laplace sampling") {
  SECTION("disabled mode is exactly zero") {
    NoiseSource off = NoiseSource::disabled();
    REQUIRE(sample_laplace(7.0, off) == 0.0);
  }
  SECTION("invalid scale") {
    NoiseSource off = NoiseSource::disabled();
    REQUIRE_THROWS_AS(sample_laplace(0.0, off), std::invalid_argument);
    REQUIRE_THROWS_AS(sample_laplace(-1.0, off), std::invalid_argument);
  }
  SECTION("moments at b = 2") {
    NoiseSource src = NoiseSource::seeded(RngStream(123));
    const long n = 100000;
    double sum = 0, sum2 = 0;
    for (long i = 0; i < n; ++i) {
      const double v = sample_laplace(2.0, src);
      sum += v;
      sum2 += v * v;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    REQUIRE(std::abs(mean) < 0.05);
    REQUIRE(std::abs(var - 8.0) < 0.5);
  }
}

TEST_CASE("gaussian vector sampling") {
  SECTION("disabled mode is the zero vector") {
    NoiseSource off = NoiseSource::disabled();
    REQUIRE(sample_gaussian_vector(3.0, 4, off).isZero());
  }
  SECTION("invalid scale") {
    NoiseSource off = NoiseSource::disabled();
    REQUIRE_THROWS_AS(sample_gaussian_vector(0.0, 2, off), std::invalid_argument);
  }
  SECTION("variance at sigma = 1, d = 1") {
    NoiseSource src = NoiseSource::seeded(RngStream(7));
    const long n = 100000;
    double sum = 0, sum2 = 0;
    for (long i = 0; i < n; ++i) {
      const double v = sample_gaussian_vector(1.0, 1, src)[0];
      sum += v;
      sum2 += v * v;
    }
    const double mean = sum / n;
    REQUIRE(std::abs(sum2 / n - mean * mean - 1.0) < 0.05);
  }
  SECTION("squared norm at sigma = 3, d = 2") {
    NoiseSource src = NoiseSource::seeded(RngStream(8));
    const long n = 100000;
    double sum = 0;
    for (long i = 0; i < n; ++i)
      sum += sample_gaussian_vector(3.0, 2, src).squaredNorm();
    REQUIRE(std::abs(sum / n - 18.0) < 1.0);
  }
}

TEST_CASE("concentration score") {
  SECTION("identical points") {
    const auto pts = constant_points(3, make_vec({1.0, 2.0}));
    REQUIRE(concentration_score(pts, 0.5) == 3.0);
  }
  SECTION("two coincident plus one far") {
    std::vector<Vec> pts = {make_vec({0.0}), make_vec({0.0}), make_vec({10.0})};
    // qualifying ordered pairs: 3 diagonal + (1,2) + (2,1) = 5
    REQUIRE(concentration_score(pts, 1.0) == Catch::Approx(5.0 / 3.0));
  }
  SECTION("single point") {
    std::vector<Vec> pts = {make_vec({42.0})};
    REQUIRE(concentration_score(pts, 0.1) == 1.0);
  }
  SECTION("empty input rejected") {
    std::vector<Vec> pts;
    REQUIRE_THROWS_AS(concentration_score(pts, 1.0), std::invalid_argument);
  }
  SECTION("permutation and translation invariance") {
    RngStream rng(5);
    std::vector<Vec> pts;
    for (int i = 0; i < 8; ++i) {
      Vec p(3);
      for (int k = 0; k < 3; ++k) p[k] = rng.uniform01();
      pts.push_back(p);
    }
    const double base = concentration_score(pts, 0.4);
    std::vector<Vec> shuffled = pts;
    std::reverse(shuffled.begin(), shuffled.end());
    REQUIRE(concentration_score(shuffled, 0.4) == base);
    const Vec shift = make_vec({5.0, -3.0, 2.0});
    std::vector<Vec> moved;
    for (const auto& p : pts) moved.push_back(p + shift);
    REQUIRE(concentration_score(moved, 0.4) == Catch::Approx(base).margin(1e-12));
  }
}

TEST_CASE("inclusion probability") {
  REQUIRE(inclusion_probability(5, 12) == 0.0);
  REQUIRE(inclusion_probability(8, 12) == 1.0);
  REQUIRE(inclusion_probability(7, 12) == 0.5);

  SECTION("monotone and continuous at the breakpoints") {
    for (int c : {3, 5, 7, 12, 26, 100}) {
      double prev = -1.0;
      for (int h = 1; h <= c; ++h) {
        const double p = inclusion_probability(h, c);
        REQUIRE(p >= prev);
        REQUIRE(p >= 0.0);
        REQUIRE(p <= 1.0);
        prev = p;
      }
      REQUIRE(inclusion_probability(c / 2.0, c) == 0.0);
      // continuity at both breakpoints (h real-valued here)
      REQUIRE(inclusion_probability(2.0 * c / 3.0, c) ==
              Catch::Approx(1.0).margin(1e-7));
      REQUIRE(inclusion_probability(c / 2.0 + 1e-9, c) ==
              Catch::Approx(0.0).margin(1e-7));
    }
  }
  SECTION("degenerate small C stays sane") {
    REQUIRE(inclusion_probability(1, 1) == 1.0);  // 3h >= 2C
    REQUIRE(inclusion_probability(1, 2) == 0.0);  // middle branch at h = C/2
    REQUIRE(inclusion_probability(2, 2) == 1.0);
    REQUIRE(inclusion_probability(2, 3) == 1.0);  // 3h = 6 >= 2C = 6
    REQUIRE(inclusion_probability(1, 3) == 0.0);  // 2h = 2 < C = 3
  }
}

TEST_CASE("outlier filter") {
  RngStream rng(17);
  SECTION("all points within tau selected with probability one") {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Vec> pts;
      Vec base(2);
      base << rng.uniform01(), rng.uniform01();
      for (int i = 0; i < 9; ++i) {
        Vec p = base;
        p[0] += 0.001 * rng.uniform01();
        pts.push_back(p);
      }
      const auto report = filter_outliers(pts, 0.01, rng);
      REQUIRE(report.selected.size() == pts.size());
      for (double p : report.inclusion_probs) REQUIRE(p == 1.0);
    }
  }
  SECTION("isolated points excluded with probability one") {
    // 8 mutually close points, 4 farther than 2*tau from everything
    const double tau = 0.1;
    std::vector<Vec> pts;
    for (int i = 0; i < 8; ++i) pts.push_back(make_vec({0.001 * i, 0.0}));
    for (int i = 0; i < 4; ++i) pts.push_back(make_vec({10.0 + 3.0 * i, 5.0}));
    const auto report = filter_outliers(pts, tau, rng);
    REQUIRE(report.selected.size() == 8);
    for (int i = 0; i < 8; ++i) {
      REQUIRE(report.per_point_scores[i] == 8.0);  // h = 8 >= 2C/3 = 8
      REQUIRE(report.inclusion_probs[i] == 1.0);
    }
    for (int i = 8; i < 12; ++i) {
      REQUIRE(report.per_point_scores[i] == 1.0);  // h = 1 < C/2 = 6
      REQUIRE(report.inclusion_probs[i] == 0.0);
    }
  }
  SECTION("single point selected") {
    std::vector<Vec> pts = {make_vec({3.0})};
    const auto report = filter_outliers(pts, 0.5, rng);
    REQUIRE(report.selected == std::vector<int>{0});
  }
  SECTION("raw score uses radius tau, per-point scores 2*tau") {
    std::vector<Vec> pts = {make_vec({0.0}), make_vec({1.5})};
    const auto report = filter_outliers(pts, 1.0, rng);
    REQUIRE(report.raw_score == 1.0);            // pairs beyond tau = 1
    REQUIRE(report.per_point_scores[0] == 2.0);  // within 2*tau = 2
  }
}

TEST_CASE("above threshold") {
  SECTION("disabled noise sweeps exactly") {
    NoiseSource off = NoiseSource::disabled();
    std::vector<double> queries = {3.0, 4.0, 6.0};
    const auto verdicts = above_threshold_sweep(queries, 5.0, 1.0, off);
    REQUIRE(verdicts == std::vector<bool>{false, false, true});
  }
  SECTION("immediate top halts the sweep") {
    NoiseSource off = NoiseSource::disabled();
    std::vector<double> queries = {6.0, 1.0, 1.0};
    const auto verdicts = above_threshold_sweep(queries, 5.0, 1.0, off);
    REQUIRE(verdicts == std::vector<bool>{true});
  }
  SECTION("accuracy event per the classic guarantee") {
    // Streams 2*alpha below the threshold: wrong-top frequency <= gamma.
    const int t_queries = 50;
    const double gamma = 0.05;
    const double eps = 1.0;
    const double alpha = AboveThreshold::accuracy_alpha(t_queries, gamma, eps);
    RngStream root(99);
    int wrong = 0;
    const int streams = 1000;
    for (int s = 0; s < streams; ++s) {
      NoiseSource src =
          NoiseSource::seeded(root.derive({static_cast<std::uint64_t>(s)}));
      AboveThreshold at(5.0, eps, src);
      for (int t = 0; t < t_queries; ++t)
        if (at.query(5.0 - 2.0 * alpha)) {
          ++wrong;
          break;
        }
    }
    REQUIRE(static_cast<double>(wrong) / streams <= gamma);
  }
  SECTION("parametric scales keep answering after top") {
    NoiseSource off = NoiseSource::disabled();
    AboveThreshold at(4.0, 8.0, 16.0, off);
    REQUIRE(at.query(5.0));
    REQUIRE_FALSE(at.query(3.0));
    REQUIRE(at.query(4.0));
  }
}

TEST_CASE("disabled noise is deterministic") {
  NoiseSource a = NoiseSource::disabled();
  NoiseSource b = NoiseSource::disabled();
  for (int i = 0; i < 5; ++i) {
    REQUIRE(sample_laplace(3.0, a) == sample_laplace(3.0, b));
    REQUIRE(sample_gaussian_vector(2.0, 3, a) == sample_gaussian_vector(2.0, 3, b));
  }
}
