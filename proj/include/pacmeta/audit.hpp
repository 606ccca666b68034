#pragma once

// Verification oracles: 1-D quadrature KL, random finite meta-systems for the
// decomposition check, and a Monte-Carlo auditor for the high-probability
// guarantee of the meta-bounds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include "pacmeta/bounds.hpp"
#include "pacmeta/env.hpp"
#include "pacmeta/gauss.hpp"
#include "pacmeta/metalearn.hpp"
#include "pacmeta/parallel.hpp"
#include "pacmeta/prior_mean.hpp"
#include "pacmeta/rng.hpp"

namespace pacmeta {

/// KL(q || p) for 1-D Gaussians by the trapezoidal rule on `grid` intervals
/// spanning 12 standard deviations (of the wider one) beyond both means.
inline double quadrature_kl_1d(const DiagonalGaussian& q, const DiagonalGaussian& p, std::size_t grid) {
  detail::require(q.dim() == 1 && p.dim() == 1, "quadrature_kl_1d: inputs must be one-dimensional");
  detail::require(grid >= 2, "quadrature_kl_1d: grid must be >= 2");
  const double mq = q.mean[0], mp = p.mean[0];
  const double vq = q.variance(0), vp = p.variance(0);
  const double s = std::sqrt(std::max(vq, vp));
  const double lo = std::min(mq, mp) - 12.0 * s, hi = std::max(mq, mp) + 12.0 * s;
  const double h = (hi - lo) / double(grid);
  const double log_norm_q = -0.5 * std::log(2.0 * std::numbers::pi * vq);
  auto integrand = [&](double x) {
    const double lq = log_norm_q - 0.5 * (x - mq) * (x - mq) / vq;
    const double lp = -0.5 * std::log(2.0 * std::numbers::pi * vp) - 0.5 * (x - mp) * (x - mp) / vp;
    return std::exp(lq) * (lq - lp);
  };
  double total = 0.5 * (integrand(lo) + integrand(hi));
  for (std::size_t k = 1; k < grid; ++k) total += integrand(lo + double(k) * h);
  return total * h;
}

/// Random finite meta-system with strictly positive tables (so every KL is finite).
inline DiscreteMetaSystem random_discrete_system(Rng& rng, std::size_t algorithms, std::size_t priors,
                                                 std::size_t models, std::size_t tasks) {
  auto simplex = [&](std::size_t k) {
    std::vector<double> p(k);
    double s = 0.0;
    for (auto& v : p) s += (v = uniform(rng, 0.05, 1.0));
    for (auto& v : p) v /= s;
    // push the rounding residue into the largest entry so the sum is 1 to the last bit
    double r = 1.0;
    for (double v : p) r -= v;
    *std::max_element(p.begin(), p.end()) += r;
    return p;
  };
  DiscreteMetaSystem sys;
  sys.rho = simplex(algorithms);
  sys.pi = simplex(algorithms);
  for (std::size_t a = 0; a < algorithms; ++a) {
    sys.hyper_posterior.push_back(simplex(priors));
    sys.hyper_prior.push_back(simplex(priors));
    sys.outputs.emplace_back();
    for (std::size_t i = 0; i < tasks; ++i) sys.outputs.back().push_back(simplex(models));
  }
  for (std::size_t p = 0; p < priors; ++p) sys.priors.push_back(simplex(models));
  return sys;
}

struct AuditRecord {
  std::size_t trial_index = 0;
  std::uint64_t seed = 0;
  double bound = 0.0;
  double true_risk_est = 0.0;
  double true_risk_se = 0.0;
  double margin = 0.0;  // bound - true_risk_est
  bool violated = false;
};

struct AuditReport {
  std::size_t trials = 0;
  std::size_t violations = 0;
  double delta = 0.1;
  std::vector<AuditRecord> records;

  double violation_rate() const { return trials ? double(violations) / double(trials) : 0.0; }
};

/// One-sided binomial tail P(X >= k) for X ~ Bin(n, p).
inline double binomial_upper_tail(std::size_t k, std::size_t n, double p) {
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  double total = 0.0;
  for (std::size_t j = k; j <= n; ++j) {
    const double lc = std::lgamma(double(n) + 1.0) - std::lgamma(double(j) + 1.0) - std::lgamma(double(n - j) + 1.0);
    total += std::exp(lc + double(j) * std::log(p) + double(n - j) * std::log1p(-p));
  }
  return std::min(1.0, total);
}

/// True unless the violation count rejects "rate <= delta" at the given level.
inline bool violation_rate_consistent(const AuditReport& r, double level = 0.01) {
  return binomial_upper_tail(r.violations, r.trials, r.delta) >= level;
}

struct TrialOutcome {
  double bound = 0.0;
  double true_risk_est = 0.0;
  double true_risk_se = 0.0;
};

using TrialFunction = std::function<TrialOutcome(std::size_t index, std::uint64_t seed)>;

inline std::uint64_t trial_seed(std::uint64_t root, std::size_t index) {
  return splitmix64(stream_seed(root, "audit/trial") + splitmix64(index));
}

/// Runs `trials` independent trials on up to `jobs` threads. A trial is a
/// violation when the oracle risk exceeds the bound by more than 3 standard errors.
inline AuditReport run_audit(std::size_t trials, double delta, std::uint64_t root_seed, const TrialFunction& trial,
                             std::size_t jobs = 1) {
  detail::require_delta(delta);
  detail::require(trials >= 1, "run_audit: trials must be >= 1");
  AuditReport report;
  report.trials = trials;
  report.delta = delta;
  report.records.resize(trials);
  parallel_for(trials, jobs, [&](std::size_t i) {
    const std::uint64_t seed = trial_seed(root_seed, i);
    const TrialOutcome o = trial(i, seed);
    AuditRecord& r = report.records[i];
    r = {i, seed, o.bound, o.true_risk_est, o.true_risk_se, o.bound - o.true_risk_est, false};
    r.violated = o.true_risk_est - 3.0 * o.true_risk_se > o.bound;
  });
  for (const auto& r : report.records) report.violations += r.violated ? 1 : 0;
  return report;
}

/// Audit of theorem2_bound for the prior-mean pipeline on the linear
/// environment: each trial samples n training tasks, learns rho, and compares
/// the bound against the oracle meta-test risk on cfg.test_tasks fresh tasks.
inline AuditReport audit_bound_validity(const LinearEnvSpec& env_spec, std::size_t n, std::size_t m,
                                        const PriorMeanConfig& cfg, std::size_t trials, std::uint64_t seed,
                                        std::size_t jobs = 1) {
  cfg.validate();
  detail::require(cfg.test_tasks >= 20, "audit_bound_validity: need at least 20 oracle tasks");
  const Environment env(env_spec);
  return run_audit(
      trials, cfg.delta, seed,
      [&](std::size_t, std::uint64_t s) {
        PriorMeanConfig c = cfg;
        c.seed = s;
        Rng rng = make_stream(s, "audit/tasks");
        const auto tasks = sample_tasks(env, n, m, rng);
        const auto fit = run_prior_mean(tasks, c);
        const auto risk = prior_mean_test_loss(fit.mu_bar, env, m, c);
        return TrialOutcome{fit.thm2.total, risk.mean, risk.standard_error};
      },
      jobs);
}

struct TwoPriorAuditConfig {
  TrainConfig train;
  std::size_t hidden_dim = 0;  // 0 selects the linear model
  std::size_t prior_samples = 16;
  std::size_t mc_bound = 100;
  std::size_t test_tasks = 20;
  std::size_t n_eval = 2000;
};

/// Same audit for the two-prior algorithm (meta-training, then adaptation of
/// fresh tasks for the oracle risk).
inline AuditReport audit_bound_validity(const EnvSpec& env_spec, std::size_t n, std::size_t m,
                                        const TwoPriorAuditConfig& cfg, std::size_t trials, std::uint64_t seed,
                                        std::size_t jobs = 1) {
  cfg.train.validate();
  detail::require(cfg.test_tasks >= 20, "audit_bound_validity: need at least 20 oracle tasks");
  const Environment env(env_spec);
  const auto arch = cfg.hidden_dim == 0 ? ModelArchitecture::linear(env.input_dim())
                                        : ModelArchitecture::mlp1(env.input_dim(), cfg.hidden_dim, env.num_classes());
  detail::require(arch.kind == ModelKind::mlp1 || env.num_classes() == 2, "audit: linear model needs a binary environment");
  const LossSpec zero_one{LossKind::zero_one, 1.0};
  return run_audit(
      trials, cfg.train.delta, seed,
      [&](std::size_t, std::uint64_t s) {
        TrainConfig tc = cfg.train;
        tc.seed = s;
        Rng rng = make_stream(s, "audit/tasks");
        const auto tasks = sample_tasks(env, n, m, rng);
        const auto trained = train_meta(tasks, arch, tc);
        Rng bound_rng = make_stream(s, "audit/bound");
        const auto in = meta_bound_input(trained.rho, trained.posteriors, tasks, arch, tc, zero_one,
                                         cfg.prior_samples, cfg.mc_bound, bound_rng);
        const auto risk = meta_test_loss(trained.rho, env, m, arch, tc, cfg.test_tasks, cfg.n_eval, s);
        return TrialOutcome{theorem2_bound(in), risk.mean, risk.standard_error};
      },
      jobs);
}

}  // namespace pacmeta
