#pragma once

// Synthetic task environments.
//
//  * linear: w* ~ N(mu_tau, sigma_tau^2 I), x ~ U[-1, 1]^d, y = 1(w*.x <= 0).
//  * permuted labels / shuffled features: a fixed base dataset of Gaussian
//    blobs; each task draws a label permutation (or a permutation of a fixed
//    subset of coordinates) and samples uniformly from the transformed points.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "pacmeta/error.hpp"
#include "pacmeta/model.hpp"
#include "pacmeta/rng.hpp"

namespace pacmeta {

struct LinearEnvSpec {
  std::size_t d = 2;
  std::vector<double> mu_tau;  // empty means 10 * 1
  double sigma_tau = 3.0;

  std::vector<double> task_mean() const { return mu_tau.empty() ? std::vector<double>(d, 10.0) : mu_tau; }

  void validate() const {
    detail::require(d >= 1, "LinearEnvSpec: d must be >= 1");
    detail::require(sigma_tau > 0.0, "LinearEnvSpec: sigma_tau must be positive");
    detail::require(mu_tau.empty() || mu_tau.size() == d, "LinearEnvSpec: mu_tau has wrong dimension");
  }
};

/// Generator of the fixed base dataset shared by all permuted/shuffled tasks.
struct BlobsSpec {
  std::size_t dim = 10;
  std::size_t classes = 4;
  std::size_t points = 256;
  double center_scale = 1.0;  // class centres ~ N(0, center_scale^2 I)
  double noise = 1.0;         // within-class std
  std::uint64_t seed = 20240611;

  void validate() const {
    detail::require(dim >= 1 && classes >= 2 && points >= classes, "BlobsSpec: need dim >= 1, classes >= 2, points >= classes");
    detail::require(center_scale > 0.0 && noise > 0.0, "BlobsSpec: scales must be positive");
  }
};

enum class PermuteMode { permute_labels, shuffle_features };

struct PermutedEnvSpec {
  BlobsSpec base;
  PermuteMode mode = PermuteMode::permute_labels;
  std::size_t num_shuffled = 5;
  bool force_identity = false;  // test hook: every task uses the identity permutation

  void validate() const {
    base.validate();
    if (mode == PermuteMode::shuffle_features) {
      detail::require(num_shuffled <= base.dim, "PermutedEnvSpec: num_shuffled exceeds input dimension");
    }
  }
};

using EnvSpec = std::variant<LinearEnvSpec, PermutedEnvSpec>;

struct LinearTaskLaw {
  std::vector<double> w_star;
};

struct PermutedTaskLaw {
  std::shared_ptr<const Dataset> base;
  std::vector<int> label_perm;            // task label = label_perm[base label]
  std::vector<std::size_t> feature_perm;  // task x[j] = base x[feature_perm[j]]
};

struct Task {
  std::variant<LinearTaskLaw, PermutedTaskLaw> law;
  Dataset train;
  std::size_t input_dim = 0;
  std::size_t num_classes = 2;
};

inline Dataset make_blobs(const BlobsSpec& spec) {
  spec.validate();
  Rng rng = make_stream(spec.seed, "env/blobs");
  std::vector<double> centers(spec.classes * spec.dim);
  for (auto& c : centers) c = spec.center_scale * standard_normal(rng);
  Dataset out{spec.dim, {}, {}};
  std::vector<double> x(spec.dim);
  for (std::size_t i = 0; i < spec.points; ++i) {
    const std::size_t cls = i % spec.classes;
    for (std::size_t j = 0; j < spec.dim; ++j) x[j] = centers[cls * spec.dim + j] + spec.noise * standard_normal(rng);
    out.push_back(x, int(cls));
  }
  return out;
}

/// Coordinates whose order is shuffled per task in shuffle_features mode.
inline std::vector<std::size_t> shuffled_coordinates(const PermutedEnvSpec& spec) {
  Rng rng = make_stream(spec.base.seed, "env/shuffle-subset");
  std::vector<std::size_t> all(spec.base.dim);
  std::iota(all.begin(), all.end(), 0);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(spec.num_shuffled);
  std::sort(all.begin(), all.end());
  return all;
}

namespace detail {

inline void draw_linear(const LinearTaskLaw& law, std::size_t n, Rng& rng, Dataset& out) {
  const std::size_t d = law.w_star.size();
  std::vector<double> x(d);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      x[j] = uniform(rng, -1.0, 1.0);
      s += law.w_star[j] * x[j];
    }
    out.push_back(x, s <= 0.0 ? 1 : 0);
  }
}

inline void transform_point(const PermutedTaskLaw& law, std::size_t idx, std::vector<double>& x, int& y) {
  const auto row = law.base->row(idx);
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = row[law.feature_perm[j]];
  y = law.label_perm[std::size_t(law.base->y[idx])];
}

inline void draw_permuted(const PermutedTaskLaw& law, std::size_t n, Rng& rng, Dataset& out) {
  std::vector<double> x(law.base->dim);
  int y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    transform_point(law, uniform_index(rng, law.base->size()), x, y);
    out.push_back(x, y);
  }
}

}  // namespace detail

/// Fresh i.i.d. samples from the task's distribution.
inline Dataset draw_samples(const Task& task, std::size_t n, Rng& rng) {
  Dataset out{task.input_dim, {}, {}};
  out.x.reserve(n * task.input_dim);
  out.y.reserve(n);
  std::visit(
      [&](const auto& law) {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, LinearTaskLaw>) detail::draw_linear(law, n, rng, out);
        else detail::draw_permuted(law, n, rng, out);
      },
      task.law);
  return out;
}

/// Task environment with its (lazily built) base dataset.
class Environment {
 public:
  explicit Environment(EnvSpec spec) : spec_(std::move(spec)) {
    std::visit([](const auto& s) { s.validate(); }, spec_);
    if (const auto* p = std::get_if<PermutedEnvSpec>(&spec_)) {
      base_ = std::make_shared<const Dataset>(make_blobs(p->base));
      if (p->mode == PermuteMode::shuffle_features) subset_ = shuffled_coordinates(*p);
    }
  }

  const EnvSpec& spec() const { return spec_; }
  std::shared_ptr<const Dataset> base() const { return base_; }

  std::size_t input_dim() const {
    if (const auto* l = std::get_if<LinearEnvSpec>(&spec_)) return l->d;
    return std::get<PermutedEnvSpec>(spec_).base.dim;
  }

  std::size_t num_classes() const {
    if (std::holds_alternative<LinearEnvSpec>(spec_)) return 2;
    return std::get<PermutedEnvSpec>(spec_).base.classes;
  }

  /// One task with m training samples.
  Task sample_task(std::size_t m, Rng& rng) const {
    detail::require(m >= 1, "sample_task: m must be >= 1");
    Task task;
    task.input_dim = input_dim();
    task.num_classes = num_classes();
    if (const auto* l = std::get_if<LinearEnvSpec>(&spec_)) {
      const auto mu = l->task_mean();
      LinearTaskLaw law{std::vector<double>(l->d)};
      for (std::size_t j = 0; j < l->d; ++j) law.w_star[j] = mu[j] + l->sigma_tau * standard_normal(rng);
      task.law = std::move(law);
    } else {
      const auto& p = std::get<PermutedEnvSpec>(spec_);
      PermutedTaskLaw law{base_, std::vector<int>(p.base.classes), std::vector<std::size_t>(p.base.dim)};
      std::iota(law.label_perm.begin(), law.label_perm.end(), 0);
      std::iota(law.feature_perm.begin(), law.feature_perm.end(), 0);
      if (!p.force_identity) {
        if (p.mode == PermuteMode::permute_labels) {
          std::shuffle(law.label_perm.begin(), law.label_perm.end(), rng);
        } else {
          std::vector<std::size_t> moved = subset_;
          std::shuffle(moved.begin(), moved.end(), rng);
          for (std::size_t k = 0; k < subset_.size(); ++k) law.feature_perm[subset_[k]] = moved[k];
        }
      }
      task.law = std::move(law);
    }
    task.train = draw_samples(task, m, rng);
    return task;
  }

 private:
  EnvSpec spec_;
  std::shared_ptr<const Dataset> base_;
  std::vector<std::size_t> subset_;
};

/// n independent tasks with m samples each.
inline std::vector<Task> sample_tasks(const Environment& env, std::size_t n, std::size_t m, Rng& rng) {
  detail::require(n >= 1 && m >= 1, "sample_tasks: n and m must be >= 1");
  std::vector<Task> tasks;
  tasks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) tasks.push_back(env.sample_task(m, rng));
  return tasks;
}

inline std::vector<Task> sample_tasks(const EnvSpec& spec, std::size_t n, std::size_t m, Rng& rng) {
  return sample_tasks(Environment(spec), n, m, rng);
}

struct RiskEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Monte-Carlo estimate of the true risk: each of n_eval terms pairs a fresh
/// sample from the task distribution with a fresh weight draw.
inline RiskEstimate true_risk_mc(const Task& task, const StochasticModel& model, const LossSpec& loss,
                                 std::size_t n_eval, Rng& rng) {
  detail::require(n_eval >= 1, "true_risk_mc: n_eval must be >= 1");
  double s = 0.0, s2 = 0.0;
  Dataset one{task.input_dim, {}, {}};
  for (std::size_t k = 0; k < n_eval; ++k) {
    one.x.clear();
    one.y.clear();
    std::visit(
        [&](const auto& law) {
          using T = std::decay_t<decltype(law)>;
          if constexpr (std::is_same_v<T, LinearTaskLaw>) detail::draw_linear(law, 1, rng, one);
          else detail::draw_permuted(law, 1, rng, one);
        },
        task.law);
    const auto w = sample(model.posterior, rng);
    const double l = sample_loss(model.arch, predict(w, model.arch, one.row(0)), one.y[0], loss);
    s += l;
    s2 += l * l;
  }
  const double n = double(n_eval);
  const double mean = s / n;
  const double var = n > 1 ? std::max(0.0, (s2 - n * mean * mean) / (n - 1.0)) : 0.0;
  return {mean, std::sqrt(var / n)};
}

}  // namespace pacmeta
