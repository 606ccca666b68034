#pragma once

// Meta-learning a Gaussian hyper-posterior over the prior mean of linear
// classifiers (the bound-comparison setting).
//
// An algorithm A_mu trains a Gaussian posterior Q on a task by minimising the
// per-task bound with prior N(mu, sigma_P^2 I), starting from mean mu and
// variance sigma_P^2. The meta-posterior over algorithms is rho = N(mu_bar,
// sigma_rho^2 I), with meta-prior pi = N(0, sigma_pi^2 I); mu_bar is found by
// iterating mu_bar <- mean of the posterior means A_mu_bar produces. For each
// algorithm the hyper-posterior over prior means is the conjugate Gaussian
// N(m*, s*^2 I) built from the trained posterior means, with shared
// hyper-prior N(0, sigma_hyper^2 I).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
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

struct PriorMeanConfig {
  double sigma_prior = 10.0;  // sigma_P
  double sigma_hyper = 20.0;  // hyper-prior std over prior means
  double sigma_rho = 3.0;     // meta-posterior std over mu
  double sigma_pi = 20.0;     // meta-prior std over mu
  std::size_t inner_steps = 100;
  double inner_lr = 0.1;
  std::size_t inner_mc = 4;
  LossSpec loss{LossKind::logistic_clipped, 4.0};
  std::size_t algorithm_samples = 64;
  std::size_t meta_iterations = 3;
  double delta = 0.1;
  std::size_t test_tasks = 20;
  std::size_t n_eval = 10000;
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(sigma_prior > 0.0 && sigma_hyper > 0.0 && sigma_rho > 0.0 && sigma_pi > 0.0,
                    "PriorMeanConfig: scales must be positive");
    detail::require(inner_lr > 0.0, "PriorMeanConfig: inner_lr must be positive");
    detail::require(inner_mc >= 1 && algorithm_samples >= 1 && test_tasks >= 1 && n_eval >= 1,
                    "PriorMeanConfig: counts must be >= 1");
    detail::require(loss.kind == LossKind::logistic_clipped, "PriorMeanConfig: training loss must be logistic_clipped");
    detail::require_delta(delta);
    loss.validate();
  }
};

/// Expected 0-1 loss of the Gibbs classifier 1(w.x <= 0), w ~ N(mean, diag(var)),
/// on a dataset, in closed form.
inline double linear_gibbs_risk(const DiagonalGaussian& q, const Dataset& data) {
  detail::require(q.dim() == data.dim, "linear_gibbs_risk: dimension mismatch");
  detail::require(!data.empty(), "linear_gibbs_risk: empty dataset");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    double mu = 0.0, var = 0.0;
    for (std::size_t j = 0; j < data.dim; ++j) {
      mu += q.mean[j] * x[j];
      var += std::exp(q.log_var[j]) * x[j] * x[j];
    }
    // P(w.x <= 0)
    double p_one;
    if (var > 0.0) p_one = 0.5 * std::erfc(mu / std::sqrt(2.0 * var));
    else p_one = mu <= 0.0 ? 1.0 : 0.0;
    total += data.y[i] == 1 ? 1.0 - p_one : p_one;
  }
  return total / double(data.size());
}

struct InnerResult {
  DiagonalGaussian posterior;
  double surrogate = 0.0;  // final clipped surrogate training loss estimate
};

/// A_mu: posterior trained on `train` against prior N(mu, sigma_P^2 I).
inline InnerResult train_task_posterior(const std::vector<double>& mu, const Dataset& train,
                                        const PriorMeanConfig& cfg, Rng& rng) {
  const std::size_t d = mu.size();
  const auto arch = ModelArchitecture::linear(d);
  const double prior_lv = 2.0 * std::log(cfg.sigma_prior);
  std::vector<double> params(mu);
  params.resize(2 * d, prior_lv);
  Optimizer opt(params.size(), OptimizerConfig{OptimizerKind::adam, cfg.inner_lr});
  std::vector<std::vector<double>> eps(cfg.inner_mc);
  InnerResult out;
  for (std::size_t step = 0; step < cfg.inner_steps; ++step) {
    for (auto& e : eps) e = standard_normal_vector(rng, d);
    Tape tape;
    const Var flat = tape.leaf(Tensor::vector(params));
    const Var mean_w = slice(flat, 0, {d});
    const Var log_var_w = slice(flat, d, {d});
    const Var risk = mc_empirical_risk(mean_w, log_var_w, arch, train, cfg.loss, eps);
    const Var kl = kl_divergence(mean_w, log_var_w, tape.constant(Tensor::vector(mu)),
                                 tape.constant(Tensor::vector(std::vector<double>(d, prior_lv))));
    const Var obj = objective::maurer(risk, kl, train.size(), cfg.delta);
    out.surrogate = risk.item();
    opt.step(params, tape.backward(obj).of(flat).data);
  }
  out.posterior = DiagonalGaussian(std::vector<double>(params.begin(), params.begin() + long(d)),
                                   std::vector<double>(params.begin() + long(d), params.end()));
  return out;
}

/// Conjugate hyper-posterior over the prior mean given posterior means w_i:
/// precision 1/sigma_hyper^2 + n/sigma_P^2, mean proportional to sum w_i / sigma_P^2.
inline DiagonalGaussian hyper_posterior(const std::vector<DiagonalGaussian>& posteriors, const PriorMeanConfig& cfg) {
  detail::require(!posteriors.empty(), "hyper_posterior: no posteriors");
  const std::size_t d = posteriors.front().dim();
  const double sp2 = cfg.sigma_prior * cfg.sigma_prior;
  const double var = 1.0 / (1.0 / (cfg.sigma_hyper * cfg.sigma_hyper) + double(posteriors.size()) / sp2);
  std::vector<double> mean(d, 0.0);
  for (const auto& q : posteriors) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += q.mean[j];
  }
  for (auto& v : mean) v *= var / sp2;
  return DiagonalGaussian::isotropic(std::move(mean), var);
}

struct PriorMeanResult {
  std::vector<double> mu_bar;
  MetaBoundInput bound_input;
  BoundTerms thm1;
  BoundTerms thm2;
  double meta_train_loss = 0.0;  // clipped surrogate on the training tasks
  double mean_task_kl = 0.0;     // E_A E_P KL(A(S_i) || P), averaged over tasks
  double mean_kl_hyper = 0.0;    // E_A KL(Q(A) || hyper-prior)
};

namespace detail {

inline std::vector<double> mean_of_posterior_means(const std::vector<DiagonalGaussian>& qs) {
  std::vector<double> out(qs.front().dim(), 0.0);
  for (const auto& q : qs) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += q.mean[j] / double(qs.size());
  }
  return out;
}

}  // namespace detail

/// Learns rho on the training tasks and evaluates both theorem bounds.
inline PriorMeanResult run_prior_mean(const std::vector<Task>& tasks, const PriorMeanConfig& cfg) {
  cfg.validate();
  detail::require(!tasks.empty(), "run_prior_mean: need at least one task");
  const std::size_t n = tasks.size(), d = tasks.front().input_dim, m = tasks.front().train.size();
  for (const auto& t : tasks) {
    detail::require(t.input_dim == d && t.train.size() == m && m >= 1, "run_prior_mean: tasks must share d and m");
  }

  PriorMeanResult out;
  out.mu_bar.assign(d, 0.0);
  for (std::size_t it = 0; it < cfg.meta_iterations; ++it) {
    std::vector<DiagonalGaussian> qs;
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng = make_stream(cfg.seed, "prior_mean/fit", it * n + i);
      qs.push_back(train_task_posterior(out.mu_bar, tasks[i].train, cfg, rng).posterior);
    }
    out.mu_bar = detail::mean_of_posterior_means(qs);
  }

  const auto rho = DiagonalGaussian::isotropic(out.mu_bar, cfg.sigma_rho * cfg.sigma_rho);
  const auto pi = DiagonalGaussian::isotropic(std::vector<double>(d, 0.0), cfg.sigma_pi * cfg.sigma_pi);
  const auto hyper_prior = DiagonalGaussian::isotropic(std::vector<double>(d, 0.0), cfg.sigma_hyper * cfg.sigma_hyper);
  const double sp2 = cfg.sigma_prior * cfg.sigma_prior;

  MetaBoundInput& in = out.bound_input;
  in.n = n;
  in.m = m;
  in.delta = cfg.delta;
  in.kl_rho_pi = kl_divergence(rho, pi);
  Rng algo_rng = make_stream(cfg.seed, "prior_mean/algorithms");
  double emp = 0.0, surrogate = 0.0, task_kl = 0.0, kl_hyper = 0.0;
  for (std::size_t k = 0; k < cfg.algorithm_samples; ++k) {
    const auto mu = sample(rho, algo_rng);
    std::vector<DiagonalGaussian> qs;
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng = make_stream(cfg.seed, "prior_mean/algorithm-fit", k * n + i);
      auto r = train_task_posterior(mu, tasks[i].train, cfg, rng);
      emp += linear_gibbs_risk(r.posterior, tasks[i].train);
      surrogate += r.surrogate;
      qs.push_back(std::move(r.posterior));
    }
    const auto hq = hyper_posterior(qs, cfg);
    AlgorithmComplexity c;
    c.kl_hyper = kl_divergence(hq, hyper_prior);
    for (const auto& q : qs) c.sum_task_kl += expected_kl_under_gaussian_mean(q, hq, sp2);
    task_kl += c.sum_task_kl / double(n);
    kl_hyper += c.kl_hyper;
    in.per_algorithm.push_back(c);
  }
  const double kn = double(cfg.algorithm_samples) * double(n);
  in.empirical_multitask_risk = std::clamp(emp / kn, 0.0, 1.0);
  out.meta_train_loss = surrogate / kn;
  out.mean_task_kl = task_kl / double(cfg.algorithm_samples);
  out.mean_kl_hyper = kl_hyper / double(cfg.algorithm_samples);
  out.thm1 = theorem1_terms(in);
  out.thm2 = theorem2_terms(in);
  return out;
}

/// Oracle meta-test loss: on each fresh task draw mu ~ rho, train A_mu on m
/// samples and estimate the true 0-1 risk. Standard error is across tasks.
inline RiskEstimate prior_mean_test_loss(const std::vector<double>& mu_bar, const Environment& env, std::size_t m,
                                         const PriorMeanConfig& cfg) {
  cfg.validate();
  const auto rho = DiagonalGaussian::isotropic(mu_bar, cfg.sigma_rho * cfg.sigma_rho);
  const LossSpec zero_one{LossKind::zero_one, 1.0};
  std::vector<double> risks;
  for (std::size_t j = 0; j < cfg.test_tasks; ++j) {
    Rng rng = make_stream(cfg.seed, "prior_mean/test", j);
    const Task task = env.sample_task(m, rng);
    const auto mu = sample(rho, rng);
    const auto q = train_task_posterior(mu, task.train, cfg, rng).posterior;
    risks.push_back(true_risk_mc(task, StochasticModel{ModelArchitecture::linear(mu.size()), q}, zero_one, cfg.n_eval, rng).mean);
  }
  double mean = 0.0;
  for (double r : risks) mean += r / double(risks.size());
  double var = 0.0;
  for (double r : risks) var += (r - mean) * (r - mean);
  const double t = double(risks.size());
  return {mean, t > 1 ? std::sqrt(var / (t - 1.0) / t) : 0.0};
}

}  // namespace pacmeta
