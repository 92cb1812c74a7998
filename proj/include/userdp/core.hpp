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

#ifndef USERDP_CORE_HPP
#define USERDP_CORE_HPP

#include <Eigen/Core>

#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "userdp/rng.hpp"

namespace userdp {

using Vec = Eigen::VectorXd;

struct InsufficientUsersError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InfeasibleScheduleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainMarginError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// How the schedules' explicit calibration constants are scaled.
///   kTheory:    each literal (100, 500, 1000, 20, ...) becomes literal * kappa.
///   kPractical: each literal becomes kappa, so desk-scale runs are feasible
///               while every formula keeps its shape.
enum class ConstantMode { kTheory, kPractical };

struct PrivacyParams {
  double epsilon = 1.0;
  double delta = 1e-6;
  double constant_scale = 1.0;  // kappa
  ConstantMode mode = ConstantMode::kTheory;

  void validate() const {
    if (!(epsilon > 0.0) || epsilon > 10.0)
      throw std::invalid_argument("PrivacyParams: epsilon must be in (0, 10]");
    if (!(delta > 0.0) || !(delta < 1.0))
      throw std::invalid_argument("PrivacyParams: delta must be in (0, 1)");
    if (!(constant_scale > 0.0))
      throw std::invalid_argument("PrivacyParams: constant_scale must be positive");
  }
};

/// Euclidean ball {x : ||x - center|| <= radius}. The radius is half the
/// diameter R used by the schedule formulas.
class BallDomain {
 public:
  BallDomain(Vec center, double radius)
      : center_(std::move(center)), radius_(radius) {
    if (!(radius_ > 0.0))
      throw std::invalid_argument("BallDomain: radius must be positive");
    if (!center_.allFinite())
      throw std::invalid_argument("BallDomain: center must be finite");
  }

  static BallDomain centered(int dim, double radius) {
    return BallDomain(Vec::Zero(dim), radius);
  }

  const Vec& center() const { return center_; }
  double radius() const { return radius_; }
  double diameter() const { return 2.0 * radius_; }
  int dim() const { return static_cast<int>(center_.size()); }

  bool contains(const Vec& x, double slack = 1e-9) const {
    return (x - center_).norm() <= radius_ + slack;
  }

  Vec project(const Vec& u) const {
    if (!u.allFinite())
      throw std::invalid_argument("project: input must be finite");
    const Vec diff = u - center_;
    const double norm = diff.norm();
    if (norm <= radius_) return u;
    return center_ + (radius_ / norm) * diff;
  }

 private:
  Vec center_;
  double radius_;
};

inline Vec project(const BallDomain& domain, const Vec& u) {
  return domain.project(u);
}

/// Counts stochastic gradient evaluations. Safe to increment from concurrent
/// workers; totals are order-independent.
class GradCounter {
 public:
  GradCounter() = default;
  GradCounter(const GradCounter&) = delete;
  GradCounter& operator=(const GradCounter&) = delete;

  void add(std::int64_t k) { count_.fetch_add(k, std::memory_order_relaxed); }
  std::int64_t count() const { return count_.load(std::memory_order_relaxed); }

 private:
  std::atomic<std::int64_t> count_{0};
};

/// Convex loss f(x, z) with its Lipschitz/smoothness metadata. `grad_fn` may
/// consume randomness (randomized smoothing); deterministic losses ignore the
/// stream. `grad_cost` is the number of base-gradient evaluations one call
/// performs (1 for plain losses, k for k-sample smoothed gradients).
struct LossModel {
  std::function<double(const Vec&, const Vec&)> value_fn;
  std::function<Vec(const Vec&, const Vec&, RngStream*)> grad_fn;
  double lipschitz = 0.0;
  double smoothness = std::numeric_limits<double>::infinity();
  double domain_margin = 0.0;
  std::int64_t grad_cost = 1;

  bool is_smooth() const { return std::isfinite(smoothness); }

  double value(const Vec& x, const Vec& z) const { return value_fn(x, z); }

  Vec gradient(const Vec& x, const Vec& z, GradCounter& counter,
               RngStream* rng = nullptr) const {
    counter.add(grad_cost);
    return grad_fn(x, z, rng);
  }
};

/// n users times m items, the unit of privacy. Rectangular by construction.
class UserDataset {
 public:
  explicit UserDataset(std::vector<std::vector<Vec>> users)
      : users_(std::move(users)) {
    if (users_.empty())
      throw std::invalid_argument("UserDataset: need at least one user");
    const std::size_t m = users_.front().size();
    if (m == 0)
      throw std::invalid_argument("UserDataset: need at least one item per user");
    for (const auto& u : users_)
      if (u.size() != m)
        throw std::invalid_argument("UserDataset: ragged user records");
  }

  int num_users() const { return static_cast<int>(users_.size()); }
  int items_per_user() const { return static_cast<int>(users_.front().size()); }
  const std::vector<Vec>& user(int i) const { return users_.at(i); }

 private:
  std::vector<std::vector<Vec>> users_;
};

/// Non-owning subset of a dataset's users; read-shareable across threads.
class DatasetView {
 public:
  DatasetView(const UserDataset& base, std::vector<int> user_ids)
      : base_(&base), user_ids_(std::move(user_ids)) {
    for (int id : user_ids_)
      if (id < 0 || id >= base.num_users())
        throw std::invalid_argument("DatasetView: user id out of range");
  }

  static DatasetView all(const UserDataset& base) {
    std::vector<int> ids(base.num_users());
    for (int i = 0; i < base.num_users(); ++i) ids[i] = i;
    return DatasetView(base, std::move(ids));
  }

  int num_users() const { return static_cast<int>(user_ids_.size()); }
  int items_per_user() const { return base_->items_per_user(); }
  const std::vector<Vec>& user(int i) const {
    return base_->user(user_ids_.at(i));
  }
  int user_id(int i) const { return user_ids_.at(i); }

  DatasetView slice(int start, int count) const {
    if (start < 0 || count < 0 || start + count > num_users())
      throw std::invalid_argument("DatasetView::slice: out of range");
    return DatasetView(*base_,
                       std::vector<int>(user_ids_.begin() + start,
                                        user_ids_.begin() + start + count));
  }

 private:
  const UserDataset* base_;
  std::vector<int> user_ids_;
};

/// Copy of a dataset with one user's items swapped out (neighboring dataset
/// construction for coupling audits).
inline UserDataset with_user_replaced(const UserDataset& base, int index,
                                      std::vector<Vec> items) {
  if (index < 0 || index >= base.num_users())
    throw std::invalid_argument("with_user_replaced: index out of range");
  if (static_cast<int>(items.size()) != base.items_per_user())
    throw std::invalid_argument("with_user_replaced: wrong item count");
  std::vector<std::vector<Vec>> users;
  users.reserve(base.num_users());
  for (int i = 0; i < base.num_users(); ++i)
    users.push_back(i == index ? items : base.user(i));
  return UserDataset(std::move(users));
}

/// Average of the per-item gradients of one user at x; increments the counter
/// by m (times the loss's per-call gradient cost).
inline Vec user_avg_gradient(const LossModel& loss, const Vec& x,
                             const std::vector<Vec>& user, GradCounter& counter,
                             RngStream* rng = nullptr) {
  if (user.empty())
    throw std::invalid_argument("user_avg_gradient: empty user record");
  Vec sum = loss.gradient(x, user.front(), counter, rng);
  for (std::size_t j = 1; j < user.size(); ++j)
    sum += loss.gradient(x, user[j], counter, rng);
  return sum / static_cast<double>(user.size());
}

/// Draws disjoint user subsets of the requested sizes via one seeded
/// permutation consumed left to right.
inline std::vector<DatasetView> split_users(const UserDataset& dataset,
                                            const std::vector<int>& sizes,
                                            RngStream rng) {
  long total = 0;
  for (int s : sizes) {
    if (s < 0) throw std::invalid_argument("split_users: negative size");
    total += s;
  }
  if (total > dataset.num_users())
    throw InsufficientUsersError("split_users: requested " +
                                 std::to_string(total) + " users, have " +
                                 std::to_string(dataset.num_users()));
  const auto perm = rng.permutation(static_cast<std::size_t>(dataset.num_users()));
  std::vector<DatasetView> views;
  views.reserve(sizes.size());
  std::size_t cursor = 0;
  for (int s : sizes) {
    std::vector<int> ids(static_cast<std::size_t>(s));
    for (int k = 0; k < s; ++k) ids[k] = static_cast<int>(perm[cursor++]);
    views.emplace_back(dataset, std::move(ids));
  }
  return views;
}

}  // namespace userdp

#endif  // USERDP_CORE_HPP
