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

#include <cmath>
#include <set>
#include <thread>

#include "userdp/core.hpp"
#include "userdp/rng.hpp"

using namespace userdp;

namespace {

Vec make_vec(std::initializer_list<double> vals) {
  Vec v(static_cast<long>(vals.size()));
  long i = 0;
  for (double x : vals) v[i++] = x;
  return v;
}

LossModel quadratic_1d() {
  LossModel loss;
  loss.value_fn = [](const Vec& x, const Vec& z) {
    return 0.5 * (x - z).squaredNorm();
  };
  loss.grad_fn = [](const Vec& x, const Vec& z, RngStream*) -> Vec {
    return x - z;
  };
  loss.lipschitz = 10.0;
  loss.smoothness = 1.0;
  return loss;
}

}  // namespace

TEST_CASE("projection onto a ball") {
  const BallDomain unit = BallDomain::centered(2, 1.0);
  REQUIRE(unit.project(make_vec({3, 4})).isApprox(make_vec({0.6, 0.8})));

  const BallDomain wide = BallDomain::centered(2, 5.0);
  REQUIRE(wide.project(make_vec({3, 4})) == make_vec({3, 4}));

  const BallDomain shifted(make_vec({1, 0}), 1.0);
  REQUIRE(shifted.project(make_vec({3, 0})).isApprox(make_vec({2, 0})));
}

TEST_CASE("projection is the closest feasible point") {
  // Independent oracle: no random feasible point may be closer than the
  // projection.
  RngStream rng(7);
  const BallDomain dom(make_vec({0.5, -0.25, 1.0}), 1.5);
  for (int trial = 0; trial < 20; ++trial) {
    Vec u(3);
    for (int i = 0; i < 3; ++i) u[i] = 6.0 * (rng.uniform01() - 0.5);
    const Vec proj = dom.project(u);
    REQUIRE(dom.contains(proj));
    const double best = (u - proj).norm();
    for (int s = 0; s < 500; ++s) {
      Vec cand(3);
      do {
        for (int i = 0; i < 3; ++i)
          cand[i] = dom.center()[i] + 2.0 * dom.radius() * (rng.uniform01() - 0.5);
      } while (!dom.contains(cand));
      REQUIRE((u - cand).norm() >= best - 1e-12);
    }
  }
}

TEST_CASE("projection idempotence and error handling") {
  RngStream rng(3);
  const BallDomain dom = BallDomain::centered(4, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    Vec u(4);
    for (int i = 0; i < 4; ++i) u[i] = 10.0 * (rng.uniform01() - 0.5);
    const Vec once = dom.project(u);
    REQUIRE(dom.project(once).isApprox(once, 1e-14));
  }
  Vec bad = make_vec({1.0, std::nan(""), 0.0, 0.0});
  REQUIRE_THROWS_AS(dom.project(bad), std::invalid_argument);
}

TEST_CASE("privacy params validation") {
  PrivacyParams ok{1.0, 1e-5, 1.0, ConstantMode::kPractical};
  REQUIRE_NOTHROW(ok.validate());
  PrivacyParams eps_hi{11.0, 1e-5, 1.0, ConstantMode::kPractical};
  REQUIRE_THROWS_AS(eps_hi.validate(), std::invalid_argument);
  PrivacyParams delta_hi{1.0, 1.0, 1.0, ConstantMode::kPractical};
  REQUIRE_THROWS_AS(delta_hi.validate(), std::invalid_argument);
  PrivacyParams kappa_bad{1.0, 1e-5, 0.0, ConstantMode::kPractical};
  REQUIRE_THROWS_AS(kappa_bad.validate(), std::invalid_argument);
}

TEST_CASE("user average gradient") {
  const LossModel loss = quadratic_1d();
  GradCounter gc;

  const Vec x = make_vec({1.0});
  SECTION("symmetric items cancel") {
    std::vector<Vec> items = {make_vec({0.0}), make_vec({2.0})};
    const Vec g = user_avg_gradient(loss, x, items, gc);
    REQUIRE(g[0] == 0.0);
    REQUIRE(gc.count() == 2);
  }
  SECTION("identical items") {
    std::vector<Vec> items = {make_vec({0.0}), make_vec({0.0})};
    const Vec g = user_avg_gradient(loss, x, items, gc);
    REQUIRE(g[0] == 1.0);
  }
  SECTION("empty record rejected") {
    std::vector<Vec> items;
    REQUIRE_THROWS_AS(user_avg_gradient(loss, x, items, gc),
                      std::invalid_argument);
  }
}

TEST_CASE("user average gradient matches a naive sum (logistic)") {
  const int d = 3;
  LossModel logistic;
  logistic.value_fn = [d](const Vec& x, const Vec& z) {
    return std::log1p(std::exp(-z[d] * z.head(d).dot(x)));
  };
  logistic.grad_fn = [d](const Vec& x, const Vec& z, RngStream*) -> Vec {
    const double margin = -z[d] * z.head(d).dot(x);
    const double s = 1.0 / (1.0 + std::exp(-margin));
    return (-z[d] * s) * z.head(d);
  };
  logistic.lipschitz = 10.0;

  RngStream rng(11);
  Vec x(d);
  for (int i = 0; i < d; ++i) x[i] = rng.uniform01() - 0.5;
  std::vector<Vec> items;
  for (int j = 0; j < 4; ++j) {
    Vec z(d + 1);
    for (int i = 0; i < d; ++i) z[i] = 2.0 * (rng.uniform01() - 0.5);
    z[d] = rng.uniform01() < 0.5 ? -1.0 : 1.0;
    items.push_back(z);
  }
  GradCounter gc;
  const Vec avg = user_avg_gradient(logistic, x, items, gc);
  Vec naive = Vec::Zero(d);
  for (const auto& z : items) naive += logistic.grad_fn(x, z, nullptr);
  naive /= 4.0;
  REQUIRE(avg.isApprox(naive, 1e-14));
  REQUIRE(gc.count() == 4);
}

TEST_CASE("split_users") {
  std::vector<std::vector<Vec>> users;
  for (int i = 0; i < 10; ++i)
    users.push_back({make_vec({static_cast<double>(i)})});
  const UserDataset data(users);

  SECTION("single group takes everyone") {
    const auto views = split_users(data, {10}, RngStream(5));
    REQUIRE(views.size() == 1);
    REQUIRE(views[0].num_users() == 10);
  }
  SECTION("disjoint partition") {
    const auto views = split_users(data, {4, 4}, RngStream(5));
    std::set<int> seen;
    for (const auto& v : views)
      for (int i = 0; i < v.num_users(); ++i) seen.insert(v.user_id(i));
    REQUIRE(seen.size() == 8);
  }
  SECTION("deterministic in the seed") {
    const auto a = split_users(data, {3, 3}, RngStream(42));
    const auto b = split_users(data, {3, 3}, RngStream(42));
    for (int g = 0; g < 2; ++g)
      for (int i = 0; i < 3; ++i)
        REQUIRE(a[g].user_id(i) == b[g].user_id(i));
  }
  SECTION("too many users requested") {
    REQUIRE_THROWS_AS(split_users(data, {6, 6}, RngStream(5)),
                      InsufficientUsersError);
  }
}

TEST_CASE("dataset shape validation") {
  REQUIRE_THROWS_AS(UserDataset({}), std::invalid_argument);
  REQUIRE_THROWS_AS(
      UserDataset({{make_vec({1.0})}, {make_vec({1.0}), make_vec({2.0})}}),
      std::invalid_argument);
}

TEST_CASE("rng streams") {
  RngStream root(99);
  SECTION("same path, same bits") {
    RngStream a = root.derive({1, 2, 3});
    RngStream b = root.derive({1, 2, 3});
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
  }
  SECTION("distinct paths differ") {
    RngStream a = root.derive({1, 2});
    RngStream b = root.derive({2, 1});
    int same = 0;
    for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
    REQUIRE(same == 0);
  }
  SECTION("derivation ignores consumption") {
    RngStream a = root;
    a.next_u64();
    a.next_u64();
    REQUIRE(a.derive({7}).next_u64() == root.derive({7}).next_u64());
  }
  SECTION("chained derivation composes") {
    REQUIRE(root.derive({4}).derive({5}).next_u64() ==
            root.derive({4, 5}).next_u64());
  }
  SECTION("permutation is a permutation") {
    RngStream a = root.derive({6});
    const auto perm = a.permutation(31);
    std::set<std::size_t> seen(perm.begin(), perm.end());
    REQUIRE(seen.size() == 31);
    REQUIRE(*seen.rbegin() == 30);
  }
  SECTION("moment sanity") {
    RngStream a = root.derive({8});
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) sum += a.normal();
    REQUIRE(std::abs(sum / n) < 0.03);
  }
}

TEST_CASE("grad counter is atomic") {
  GradCounter gc;
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&gc] {
      for (int i = 0; i < 10000; ++i) gc.add(1);
    });
  for (auto& th : threads) th.join();
  REQUIRE(gc.count() == 40000);
}

TEST_CASE("neighboring dataset construction") {
  std::vector<std::vector<Vec>> users;
  for (int i = 0; i < 4; ++i)
    users.push_back({make_vec({static_cast<double>(i)}), make_vec({0.0})});
  const UserDataset data(users);
  const UserDataset other =
      with_user_replaced(data, 2, {make_vec({9.0}), make_vec({9.0})});
  REQUIRE(other.user(2)[0][0] == 9.0);
  REQUIRE(other.user(1)[0][0] == 1.0);
  REQUIRE_THROWS_AS(with_user_replaced(data, 2, {make_vec({9.0})}),
                    std::invalid_argument);
}
