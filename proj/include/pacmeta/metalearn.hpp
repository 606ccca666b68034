#pragma once

// Two-prior meta-learning.
//
// An algorithm is a pair (P0, P1) of Gaussian priors over network weights: a
// new task's stochastic network is initialised from P0 and trained by
// minimising a PAC-Bayes bound with P1 as prior. The meta-posterior is
// rho = rho0 x rho1 with rho_i = N(theta_i, kappa_rho^2 I) over the 2D prior
// parameters (D weight means followed by D log-variances); the meta-prior is
// pi_i = N(0, kappa_pi^2 I). With hyper-posterior and hyper-prior both the
// Dirac at P1, the training objective is
//
//   er_hat(rho) + sqrt((KL(rho||pi) + log(4 sqrt(n)/delta)) / (2n))
//     + sqrt((KL(rho||pi) + E_{(P0,P1)~rho} sum_i KL(Q_i||P1) + log(8mn/delta) + 1) / (2mn)).
//
// Training runs in two stages: first rho0 = rho1 (a single theta) jointly with
// the task posteriors Q_i; then theta0 is frozen, the Q_i are re-initialised
// from rho0, and theta1 and the Q_i are optimised further.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pacmeta/bounds.hpp"
#include "pacmeta/diff.hpp"
#include "pacmeta/env.hpp"
#include "pacmeta/gauss.hpp"
#include "pacmeta/model.hpp"
#include "pacmeta/objectives.hpp"
#include "pacmeta/optim.hpp"
#include "pacmeta/rng.hpp"

namespace pacmeta {

struct MetaPosterior {
  std::vector<double> theta0;  // mean of rho0 (initialisation prior parameters)
  std::vector<double> theta1;  // mean of rho1 (regularisation prior parameters)
  double kappa_rho = 1e-3;

  std::size_t weight_dim() const { return theta0.size() / 2; }

  void validate() const {
    detail::require(!theta0.empty() && theta0.size() % 2 == 0, "MetaPosterior: theta must have even, nonzero length");
    detail::require(theta0.size() == theta1.size(), "MetaPosterior: theta0/theta1 dimension mismatch");
    detail::require(kappa_rho > 0.0, "MetaPosterior: kappa_rho must be positive");
  }

  DiagonalGaussian rho0() const { return DiagonalGaussian::isotropic(theta0, kappa_rho * kappa_rho); }
  DiagonalGaussian rho1() const { return DiagonalGaussian::isotropic(theta1, kappa_rho * kappa_rho); }

  /// Same distribution used for initialisation and regularisation (rho0 := rho1).
  MetaPosterior tied() const { return {theta1, theta1, kappa_rho}; }

  bool operator==(const MetaPosterior&) const = default;
};

struct MetaPrior {
  double kappa_pi = 100.0;

  DiagonalGaussian component(std::size_t param_dim) const {
    return DiagonalGaussian::isotropic(std::vector<double>(param_dim, 0.0), kappa_pi * kappa_pi);
  }
};

struct TrainConfig {
  std::size_t epochs_stage1 = 100;
  std::size_t epochs_stage2 = 100;
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  double delta = 0.1;
  double kappa_pi = 100.0;
  double kappa_rho = 1e-3;
  std::size_t mc_train = 1;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  LossSpec loss{LossKind::cross_entropy_clipped, 4.0};
  std::size_t adapt_epochs = 100;
  std::size_t mc_eval = 1000;

  void validate() const {
    detail::require(epochs_stage1 >= 1, "TrainConfig: epochs_stage1 must be >= 1");
    detail::require(learning_rate > 0.0, "TrainConfig: learning_rate must be positive");
    detail::require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    detail::require_delta(delta);
    detail::require(kappa_pi > 0.0 && kappa_rho > 0.0, "TrainConfig: kappa values must be positive");
    detail::require(mc_train >= 1 && mc_eval >= 1, "TrainConfig: Monte-Carlo counts must be >= 1");
    loss.validate();
  }

  OptimizerConfig optimizer_config() const { return {optimizer, learning_rate, beta1, beta2, epsilon}; }
};

/// Splits a 2D prior parameter vector into the prior it describes.
inline DiagonalGaussian prior_from_parameters(std::span<const double> params) {
  detail::require(params.size() % 2 == 0 && !params.empty(), "prior_from_parameters: odd parameter length");
  const std::size_t d = params.size() / 2;
  return DiagonalGaussian(std::vector<double>(params.begin(), params.begin() + long(d)),
                          std::vector<double>(params.begin() + long(d), params.end()));
}

inline std::vector<double> parameters_of(const DiagonalGaussian& g) {
  std::vector<double> out = g.mean;
  out.insert(out.end(), g.log_var.begin(), g.log_var.end());
  return out;
}

/// KL(rho||pi) = (4D kappa_rho^2 + |theta0|^2 + |theta1|^2) / (2 kappa_pi^2) - 2D + 4D log(kappa_pi/kappa_rho).
inline double meta_kl(const MetaPosterior& rho, const MetaPrior& pi) {
  rho.validate();
  detail::require(pi.kappa_pi > 0.0, "meta_kl: kappa_pi must be positive");
  const double D = double(rho.weight_dim());
  double sq = 0.0;
  for (double v : rho.theta0) sq += v * v;
  for (double v : rho.theta1) sq += v * v;
  const double kr = rho.kappa_rho, kp = pi.kappa_pi;
  return (4.0 * D * kr * kr + sq) / (2.0 * kp * kp) - 2.0 * D + 4.0 * D * std::log(kp / kr);
}

/// Tape version of meta_kl; theta0 and theta1 may be the same node.
inline Var meta_kl(Var theta0, Var theta1, double kappa_rho, double kappa_pi) {
  const std::size_t len = theta0.value().size();
  detail::require(len == theta1.value().size() && len % 2 == 0, "meta_kl: theta dimension mismatch");
  const double D = double(len / 2);
  const double constant = 4.0 * D * kappa_rho * kappa_rho / (2.0 * kappa_pi * kappa_pi) - 2.0 * D +
                          4.0 * D * std::log(kappa_pi / kappa_rho);
  return (sum(theta0 * theta0) + sum(theta1 * theta1)) * (1.0 / (2.0 * kappa_pi * kappa_pi)) + constant;
}

/// Fixed reparametrisation noise for one evaluation of the meta-objective.
struct MetaObjectiveNoise {
  std::vector<double> prior_eps;                            // 2D, draws P1 = theta1 + kappa_rho * eps
  std::vector<std::vector<std::vector<double>>> weight_eps;  // [task][mc draw][D]

  static MetaObjectiveNoise draw(std::size_t weight_dim, std::size_t n, std::size_t mc, Rng& rng) {
    MetaObjectiveNoise noise;
    noise.prior_eps = standard_normal_vector(rng, 2 * weight_dim);
    noise.weight_eps.resize(n);
    for (auto& per_task : noise.weight_eps) {
      per_task.resize(mc);
      for (auto& e : per_task) e = standard_normal_vector(rng, weight_dim);
    }
    return noise;
  }
};

struct MetaObjectiveTerms {
  Var total;
  Var empirical;
  Var task_level;
  Var multitask;
  Var kl_rho_pi;
  Var sum_task_kl;
};

/// The training objective above on a tape. `batches[i]` is the minibatch of
/// task i; `m` is the full per-task sample count entering the bound.
inline MetaObjectiveTerms meta_objective(Var theta0, Var theta1, std::span<const Var> q_mean,
                                         std::span<const Var> q_log_var, const ModelArchitecture& arch,
                                         std::span<const Dataset> batches, std::size_t m, const TrainConfig& cfg,
                                         const MetaObjectiveNoise& noise) {
  const std::size_t n = batches.size();
  detail::require(n >= 1, "meta_objective: need at least one task");
  detail::require(q_mean.size() == n && q_log_var.size() == n && noise.weight_eps.size() == n,
                  "meta_objective: posterior/task count mismatch");
  const std::size_t D = arch.parameter_count();
  detail::require(theta1.value().size() == 2 * D, "meta_objective: theta has wrong dimension");
  Tape& t = *theta1.tape;

  MetaObjectiveTerms out;
  out.kl_rho_pi = meta_kl(theta0, theta1, cfg.kappa_rho, cfg.kappa_pi);

  const Var eps = t.constant(Tensor::vector(noise.prior_eps));
  const Var p1 = theta1 + eps * cfg.kappa_rho;
  const Var p1_mean = slice(p1, 0, {D});
  const Var p1_log_var = slice(p1, D, {D});

  Var risk_sum = mc_empirical_risk(q_mean[0], q_log_var[0], arch, batches[0], cfg.loss, noise.weight_eps[0]);
  Var kl_sum = kl_divergence(q_mean[0], q_log_var[0], p1_mean, p1_log_var);
  for (std::size_t i = 1; i < n; ++i) {
    risk_sum = risk_sum + mc_empirical_risk(q_mean[i], q_log_var[i], arch, batches[i], cfg.loss, noise.weight_eps[i]);
    kl_sum = kl_sum + kl_divergence(q_mean[i], q_log_var[i], p1_mean, p1_log_var);
  }
  out.empirical = risk_sum * (1.0 / double(n));
  out.sum_task_kl = kl_sum;
  out.task_level = objective::task_level(out.kl_rho_pi, n, cfg.delta);
  out.multitask = objective::multitask(out.kl_rho_pi + kl_sum, n, m, cfg.delta);
  out.total = out.empirical + out.task_level + out.multitask;
  return out;
}

/// Thrown when the objective becomes non-finite; carries the trace so far.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, std::vector<double> trace)
      : NumericError(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

struct TrainResult {
  MetaPosterior rho;
  std::vector<double> trace;  // mean objective per epoch, stage 1 then stage 2
  std::vector<DiagonalGaussian> posteriors;
};

namespace detail {

inline std::size_t common_sample_count(const std::vector<Task>& tasks) {
  require(!tasks.empty(), "meta-training needs at least one task");
  const std::size_t m = tasks.front().train.size();
  for (const auto& t : tasks) require(t.train.size() == m && m >= 1, "meta-training expects equal, nonzero task sizes");
  return m;
}

/// Per-epoch minibatch plan: batches[i][s] holds the indices of task i's s-th batch.
inline std::vector<std::vector<std::vector<std::size_t>>> plan_batches(std::size_t n, std::size_t m, std::size_t batch,
                                                                        Rng& rng) {
  const std::size_t b = std::min(batch, m);
  const std::size_t steps = (m + b - 1) / b;
  std::vector<std::vector<std::vector<std::size_t>>> plan(n, std::vector<std::vector<std::size_t>>(steps));
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t s = 0; s < steps; ++s) {
      const std::size_t lo = s * b, hi = std::min(m, lo + b);
      plan[i][s].assign(order.begin() + long(lo), order.begin() + long(hi));
    }
  }
  return plan;
}

/// One stage of meta-training over the flat vector
/// [theta (2D) | Q_1 mean (D) | Q_1 log_var (D) | ...]. When `frozen_theta0`
/// is set, theta is theta1 and theta0 is a constant; otherwise theta plays both roles.
inline void run_meta_stage(std::vector<double>& params, const std::vector<double>* frozen_theta0,
                           const std::vector<Task>& tasks, const ModelArchitecture& arch, const TrainConfig& cfg,
                           std::size_t epochs, Rng& batch_rng, Rng& noise_rng, std::vector<double>& trace) {
  const std::size_t n = tasks.size(), D = arch.parameter_count(), m = tasks.front().train.size();
  Optimizer opt(params.size(), cfg.optimizer_config());
  std::vector<Dataset> batches(n);
  std::vector<Var> q_mean(n), q_log_var(n);
  std::vector<double> grad(params.size());
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const auto plan = plan_batches(n, m, cfg.batch_size, batch_rng);
    const std::size_t steps = plan.front().size();
    double epoch_total = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      for (std::size_t i = 0; i < n; ++i) batches[i] = tasks[i].train.subset(plan[i][s]);
      const auto noise = MetaObjectiveNoise::draw(D, n, cfg.mc_train, noise_rng);
      Tape tape;
      const Var flat = tape.leaf(Tensor::vector(params));
      const Var theta = slice(flat, 0, {2 * D});
      for (std::size_t i = 0; i < n; ++i) {
        q_mean[i] = slice(flat, 2 * D + 2 * i * D, {D});
        q_log_var[i] = slice(flat, 2 * D + 2 * i * D + D, {D});
      }
      const Var theta0 = frozen_theta0 ? tape.constant(Tensor::vector(*frozen_theta0)) : theta;
      MetaObjectiveTerms terms;
      try {
        terms = meta_objective(theta0, theta, q_mean, q_log_var, arch, batches, m, cfg, noise);
      } catch (const NumericError& e) {
        throw TrainingDiverged(std::string("meta-training diverged: ") + e.what(), trace);
      }
      const double value = terms.total.item();
      const auto g = tape.backward(terms.total).of(flat).data;
      for (double v : g) {
        if (!std::isfinite(v)) throw TrainingDiverged("meta-training produced a non-finite gradient", trace);
      }
      opt.step(params, g);
      epoch_total += value;
    }
    trace.push_back(epoch_total / double(steps));
  }
}

}  // namespace detail

/// Two-stage meta-training. Deterministic given cfg.seed.
inline TrainResult train_meta(const std::vector<Task>& tasks, const ModelArchitecture& arch, const TrainConfig& cfg) {
  cfg.validate();
  arch.validate();
  detail::common_sample_count(tasks);
  const std::size_t n = tasks.size(), D = arch.parameter_count();
  for (const auto& t : tasks) detail::require(t.input_dim == arch.input_dim, "train_meta: task/architecture input mismatch");

  Rng init_rng = make_stream(cfg.seed, "metalearn/init");
  Rng batch_rng = make_stream(cfg.seed, "metalearn/batches");
  Rng noise_rng = make_stream(cfg.seed, "metalearn/noise");
  Rng stage2_rng = make_stream(cfg.seed, "metalearn/stage2-init");

  std::vector<double> params;
  params.reserve(2 * D * (n + 1));
  const auto theta_init = parameters_of(glorot_init(arch, init_rng));
  params.insert(params.end(), theta_init.begin(), theta_init.end());
  for (std::size_t i = 0; i < n; ++i) {
    const auto q = parameters_of(glorot_init(arch, init_rng));
    params.insert(params.end(), q.begin(), q.end());
  }

  TrainResult result;
  detail::run_meta_stage(params, nullptr, tasks, arch, cfg, cfg.epochs_stage1, batch_rng, noise_rng, result.trace);

  const std::vector<double> theta0(params.begin(), params.begin() + long(2 * D));
  if (cfg.epochs_stage2 > 0) {
    const auto rho0 = DiagonalGaussian::isotropic(theta0, cfg.kappa_rho * cfg.kappa_rho);
    for (std::size_t i = 0; i < n; ++i) {
      const auto draw = sample(rho0, stage2_rng);
      std::copy(draw.begin(), draw.end(), params.begin() + long(2 * D + 2 * i * D));
    }
    detail::run_meta_stage(params, &theta0, tasks, arch, cfg, cfg.epochs_stage2, batch_rng, noise_rng, result.trace);
  }

  result.rho = MetaPosterior{theta0, std::vector<double>(params.begin(), params.begin() + long(2 * D)), cfg.kappa_rho};
  for (std::size_t i = 0; i < n; ++i) {
    result.posteriors.push_back(prior_from_parameters(
        std::span<const double>(params.data() + 2 * D + 2 * i * D, 2 * D)));
  }
  return result;
}

/// Builds the certified-bound input for a trained (rho, Q_1..Q_n): hyper-posterior
/// and hyper-prior are the Dirac at P1, so each algorithm sample contributes
/// only sum_i KL(Q_i||P1). P1 is drawn `prior_samples` times from rho1 and
/// the empirical risk uses `mc` weight draws per task on the full training sets.
inline MetaBoundInput meta_bound_input(const MetaPosterior& rho, const std::vector<DiagonalGaussian>& posteriors,
                                       const std::vector<Task>& tasks, const ModelArchitecture& arch,
                                       const TrainConfig& cfg, const LossSpec& loss, std::size_t prior_samples,
                                       std::size_t mc, Rng& rng) {
  rho.validate();
  const std::size_t n = tasks.size();
  detail::require(posteriors.size() == n, "meta_bound_input: posterior/task count mismatch");
  MetaBoundInput in;
  in.n = n;
  in.m = detail::common_sample_count(tasks);
  in.delta = cfg.delta;
  in.kl_rho_pi = meta_kl(rho, MetaPrior{cfg.kappa_pi});
  double risk = 0.0;
  for (std::size_t i = 0; i < n; ++i) risk += mc_empirical_risk({arch, posteriors[i]}, tasks[i].train, loss, mc, rng);
  in.empirical_multitask_risk = risk / double(n);
  const auto rho1 = rho.rho1();
  for (std::size_t k = 0; k < prior_samples; ++k) {
    const auto p1 = prior_from_parameters(sample(rho1, rng));
    double s = 0.0;
    for (const auto& q : posteriors) s += kl_divergence(q, p1);
    in.per_algorithm.push_back({0.0, s, 1.0});
  }
  return in;
}

struct AdaptResult {
  StochasticModel model;
  double bound = 0.0;           // adaptation bound with the optimised (clipped) loss
  double empirical_risk = 0.0;  // clipped training loss, mc_eval weight draws
  double kl = 0.0;              // KL(Q_new || P1)
  std::vector<double> trace;
};

/// Learns a posterior for a new task: initialise from P0 ~ rho0, then minimise
/// the adaptation bound with prior P1 ~ rho1 for `adapt_epochs` epochs.
inline AdaptResult adapt(const MetaPosterior& rho, const Task& task, const ModelArchitecture& arch,
                         const TrainConfig& cfg, std::size_t adapt_epochs, Rng& rng) {
  rho.validate();
  cfg.validate();
  const std::size_t D = arch.parameter_count();
  detail::require(rho.weight_dim() == D, "adapt: meta-posterior does not match the architecture");
  const std::size_t m = task.train.size();
  detail::require(m >= 1, "adapt: task has no samples");

  std::vector<double> params = sample(rho.rho0(), rng);
  const auto p1 = prior_from_parameters(sample(rho.rho1(), rng));

  AdaptResult out;
  Optimizer opt(params.size(), cfg.optimizer_config());
  for (std::size_t epoch = 0; epoch < adapt_epochs; ++epoch) {
    const auto plan = detail::plan_batches(1, m, cfg.batch_size, rng);
    double total = 0.0;
    for (const auto& idx : plan[0]) {
      const Dataset batch = task.train.subset(idx);
      std::vector<std::vector<double>> eps(cfg.mc_train);
      for (auto& e : eps) e = standard_normal_vector(rng, D);
      Tape tape;
      const Var flat = tape.leaf(Tensor::vector(params));
      const Var mean_w = slice(flat, 0, {D});
      const Var log_var_w = slice(flat, D, {D});
      const Var risk = mc_empirical_risk(mean_w, log_var_w, arch, batch, cfg.loss, eps);
      const Var kl = kl_divergence(mean_w, log_var_w, tape.constant(Tensor::vector(p1.mean)),
                                   tape.constant(Tensor::vector(p1.log_var)));
      const Var obj = objective::adaptation(risk, kl, m, cfg.delta);
      total += obj.item();
      opt.step(params, tape.backward(obj).of(flat).data);
    }
    out.trace.push_back(total / double(plan[0].size()));
  }
  out.model = StochasticModel{arch, prior_from_parameters(params)};
  out.empirical_risk = mc_empirical_risk(out.model, task.train, cfg.loss, cfg.mc_eval, rng);
  out.kl = kl_divergence(out.model.posterior, p1);
  out.bound = adaptation_bound(out.empirical_risk, out.kl, m, cfg.delta);
  return out;
}

/// Data-independent baseline: P0 = P1 = the zero parameter vector (zero means,
/// unit variances), i.e. the centre of the meta-prior.
inline AdaptResult independent_baseline(const Task& task, const ModelArchitecture& arch, const TrainConfig& cfg,
                                        std::size_t adapt_epochs, Rng& rng) {
  const std::vector<double> zero(2 * arch.parameter_count(), 0.0);
  return adapt(MetaPosterior{zero, zero, cfg.kappa_rho}, task, arch, cfg, adapt_epochs, rng);
}

/// Oracle meta-test loss of rho: adapt to `test_tasks` fresh tasks with m
/// samples each and estimate each adapted model's true 0-1 risk. The standard
/// error is across tasks. Task j uses the stream ("metalearn/test", j) of `seed`.
inline RiskEstimate meta_test_loss(const MetaPosterior& rho, const Environment& env, std::size_t m,
                                   const ModelArchitecture& arch, const TrainConfig& cfg, std::size_t test_tasks,
                                   std::size_t n_eval, std::uint64_t seed, bool independent = false) {
  detail::require(test_tasks >= 1, "meta_test_loss: need at least one test task");
  const LossSpec zero_one{LossKind::zero_one, 1.0};
  std::vector<double> risks;
  for (std::size_t j = 0; j < test_tasks; ++j) {
    Rng rng = make_stream(seed, "metalearn/test", j);
    const Task task = env.sample_task(m, rng);
    const auto a = independent ? independent_baseline(task, arch, cfg, cfg.adapt_epochs, rng)
                               : adapt(rho, task, arch, cfg, cfg.adapt_epochs, rng);
    risks.push_back(true_risk_mc(task, a.model, zero_one, n_eval, rng).mean);
  }
  double mean = 0.0, var = 0.0;
  for (double r : risks) mean += r / double(risks.size());
  for (double r : risks) var += (r - mean) * (r - mean);
  const double t = double(risks.size());
  return {mean, t > 1 ? std::sqrt(var / (t - 1.0) / t) : 0.0};
}

}  // namespace pacmeta
