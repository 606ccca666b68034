#pragma once

// PAC-Bayes bound evaluators: the single-task bound, the adaptation objective
// for a new task, the two meta-learning bounds (algorithm-specific and shared
// hyper-prior), the fixed-lambda multi-task inequality with its optimal
// lambda, and an exact checker for the KL chain rule over the joint
// (algorithm, prior, models) generating process.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "pacmeta/error.hpp"

namespace pacmeta {

namespace detail {

inline void require_delta(double delta) {
  require(delta > 0.0 && delta < 1.0, "confidence delta must lie in (0, 1), got " + std::to_string(delta));
}

inline void require_nonneg(double v, const char* what) {
  require(v >= 0.0 && std::isfinite(v), std::string(what) + " must be finite and >= 0");
}

inline void require_unit(double v, const char* what) {
  require(v >= 0.0 && v <= 1.0, std::string(what) + " must lie in [0, 1]");
}

}  // namespace detail

struct PerTaskBoundInput {
  double empirical_risk = 0.0;
  double kl_q_p = 0.0;
  std::size_t m = 1;
  double delta = 0.1;
};

/// er(Q) <= er_hat(Q) + sqrt((KL(Q||P) + log(2 sqrt(m) / delta)) / (2m)).
inline double maurer_bound(const PerTaskBoundInput& in) {
  detail::require_delta(in.delta);
  detail::require_unit(in.empirical_risk, "empirical_risk");
  detail::require_nonneg(in.kl_q_p, "kl_q_p");
  detail::require(in.m >= 1, "maurer_bound: m must be >= 1");
  const double m = double(in.m);
  return in.empirical_risk + std::sqrt((in.kl_q_p + std::log(2.0 * std::sqrt(m) / in.delta)) / (2.0 * m));
}

/// Objective minimised on a new task: er_hat + sqrt((KL + log(8m/delta) + 1) / (2m)).
inline double adaptation_bound(double empirical_risk, double kl_q_p1, std::size_t m, double delta) {
  detail::require_delta(delta);
  detail::require_unit(empirical_risk, "empirical_risk");
  detail::require_nonneg(kl_q_p1, "kl_q_p1");
  detail::require(m >= 1, "adaptation_bound: m must be >= 1");
  const double md = double(m);
  return empirical_risk + std::sqrt((kl_q_p1 + std::log(8.0 * md / delta) + 1.0) / (2.0 * md));
}

/// Complexity contribution of one algorithm A (a draw from rho, or an atom of
/// a discrete rho with the given weight).
struct AlgorithmComplexity {
  double kl_hyper = 0.0;     // KL(Q(A) || P(A)), or KL(Q(A) || P) for a shared hyper-prior
  double sum_task_kl = 0.0;  // E_{P ~ Q(A)} sum_i KL(A(S_i) || P)
  double weight = 1.0;

  double total() const { return kl_hyper + sum_task_kl; }
};

struct MetaBoundInput {
  double empirical_multitask_risk = 0.0;
  double kl_rho_pi = 0.0;
  std::vector<AlgorithmComplexity> per_algorithm;
  std::size_t n = 1;
  std::size_t m = 1;
  double delta = 0.1;

  void validate() const {
    detail::require_delta(delta);
    detail::require(n >= 1 && m >= 1, "MetaBoundInput: n and m must be >= 1");
    detail::require_unit(empirical_multitask_risk, "empirical_multitask_risk");
    detail::require_nonneg(kl_rho_pi, "kl_rho_pi");
    detail::require(!per_algorithm.empty(), "MetaBoundInput: need at least one algorithm sample");
    double w = 0.0;
    for (const auto& a : per_algorithm) {
      detail::require_nonneg(a.kl_hyper, "kl_hyper");
      detail::require_nonneg(a.sum_task_kl, "sum_task_kl");
      detail::require(a.weight > 0.0 && std::isfinite(a.weight), "MetaBoundInput: algorithm weights must be positive");
      w += a.weight;
    }
    detail::require(w > 0.0, "MetaBoundInput: weights sum to zero");
  }

  /// E_{A ~ rho}[f(A)] over the weighted samples.
  template <class F>
  double expectation(F f) const {
    double num = 0.0, den = 0.0;
    for (const auto& a : per_algorithm) {
      num += a.weight * f(a);
      den += a.weight;
    }
    return num / den;
  }
};

/// Decomposition of a meta-bound value. total = empirical + task_level + multitask.
struct BoundTerms {
  double empirical = 0.0;
  double task_level = 0.0;
  double multitask = 0.0;
  double total = 0.0;
};

/// sqrt((KL(rho||pi) + log(4 sqrt(n) / delta)) / (2n)).
inline double task_level_term(double kl_rho_pi, std::size_t n, double delta) {
  const double nd = double(n);
  return std::sqrt((kl_rho_pi + std::log(4.0 * std::sqrt(nd) / delta)) / (2.0 * nd));
}

/// sqrt((K + log(8mn / delta) + 1) / (2mn)).
inline double multitask_sqrt_term(double kl_joint, std::size_t n, std::size_t m, double delta) {
  const double nm = double(n) * double(m);
  return std::sqrt((kl_joint + std::log(8.0 * nm / delta) + 1.0) / (2.0 * nm));
}

/// Bound with algorithm-dependent hyper-priors.
inline BoundTerms theorem1_terms(const MetaBoundInput& in) {
  in.validate();
  BoundTerms t;
  t.empirical = in.empirical_multitask_risk;
  t.task_level = task_level_term(in.kl_rho_pi, in.n, in.delta);
  const double c1 = in.expectation([](const AlgorithmComplexity& a) { return a.total(); });
  t.multitask = multitask_sqrt_term(in.kl_rho_pi + c1, in.n, in.m, in.delta);
  t.total = t.empirical + t.task_level + t.multitask;
  return t;
}

inline double theorem1_bound(const MetaBoundInput& in) { return theorem1_terms(in).total; }

/// Bound with one hyper-prior shared by all algorithms; the expectation over
/// algorithms sits outside the square root and KL(rho||pi) drops out of it.
inline BoundTerms theorem2_terms(const MetaBoundInput& in) {
  in.validate();
  BoundTerms t;
  t.empirical = in.empirical_multitask_risk;
  t.task_level = task_level_term(in.kl_rho_pi, in.n, in.delta);
  t.multitask = in.expectation(
      [&](const AlgorithmComplexity& a) { return multitask_sqrt_term(a.total(), in.n, in.m, in.delta); });
  t.total = t.empirical + t.task_level + t.multitask;
  return t;
}

inline double theorem2_bound(const MetaBoundInput& in) { return theorem2_terms(in).total; }

// ---------------------------------------------------------------------------
// Fixed-lambda forms of the multi-task gap.

/// (KL_joint + log(2/delta)) / lambda + lambda / (8nm): the gap bound at one lambda.
inline double lemma2_lambda_form(double kl_joint, double lambda, std::size_t n, std::size_t m, double delta) {
  detail::require(lambda > 0.0, "lemma2_lambda_form: lambda must be positive");
  detail::require_delta(delta);
  detail::require_nonneg(kl_joint, "kl_joint");
  const double nm = double(n) * double(m);
  return (kl_joint + std::log(2.0 / delta)) / lambda + lambda / (8.0 * nm);
}

/// Same inequality after the union bound over lambda in {1, ..., 4mn}:
/// the confidence term becomes log(8mn/delta).
inline double union_lambda_form(double kl_joint, double lambda, std::size_t n, std::size_t m, double delta) {
  detail::require(lambda > 0.0, "union_lambda_form: lambda must be positive");
  detail::require_delta(delta);
  detail::require_nonneg(kl_joint, "kl_joint");
  const double nm = double(n) * double(m);
  return (kl_joint + std::log(8.0 * nm / delta)) / lambda + lambda / (8.0 * nm);
}

/// Real-lambda relaxation of union_lambda_form, valid for lambda in (1, 4mn]:
/// 1/floor(lambda) <= 1/(lambda - 1).
inline double relaxed_lambda_form(double kl_joint, double lambda, std::size_t n, std::size_t m, double delta) {
  detail::require(lambda > 1.0, "relaxed_lambda_form: lambda must exceed 1");
  detail::require_delta(delta);
  const double nm = double(n) * double(m);
  return (kl_joint + std::log(8.0 * nm / delta)) / (lambda - 1.0) + lambda / (8.0 * nm);
}

struct LambdaStar {
  double lambda = 0.0;
  bool clipped = false;  // lambda* > 4mn: the multitask square-root term already exceeds 1
};

/// lambda* = sqrt(8mn (KL_joint + log(8mn/delta)) + 1).
inline LambdaStar lambda_star(double kl_joint, std::size_t n, std::size_t m, double delta) {
  detail::require_delta(delta);
  detail::require_nonneg(kl_joint, "kl_joint");
  const double nm = double(n) * double(m);
  const double lam = std::sqrt(8.0 * nm * (kl_joint + std::log(8.0 * nm / delta)) + 1.0);
  return {lam, lam > 4.0 * nm};
}

/// min over integer lambda in {1, ..., 4mn} of union_lambda_form.
inline double union_grid_minimum(double kl_joint, std::size_t n, std::size_t m, double delta) {
  const std::size_t top = 4 * n * m;
  double best = union_lambda_form(kl_joint, 1.0, n, m, delta);
  for (std::size_t l = 2; l <= top; ++l) best = std::min(best, union_lambda_form(kl_joint, double(l), n, m, delta));
  return best;
}

// ---------------------------------------------------------------------------
// Exact KL chain rule on finite systems.

/// Finite meta-learning system: algorithms a, priors p (each a distribution over
/// models f), per-algorithm posteriors over models for each task i.
struct DiscreteMetaSystem {
  std::vector<double> rho;                                  // [a]
  std::vector<double> pi;                                   // [a]
  std::vector<std::vector<double>> hyper_posterior;         // [a][p]
  std::vector<std::vector<double>> hyper_prior;             // [a][p]
  std::vector<std::vector<double>> priors;                  // [p][f]
  std::vector<std::vector<std::vector<double>>> outputs;    // [a][i][f] = A_a(S_i)

  std::size_t algorithms() const { return rho.size(); }
  std::size_t prior_count() const { return priors.size(); }
  std::size_t models() const { return priors.empty() ? 0 : priors[0].size(); }
  std::size_t tasks() const { return outputs.empty() ? 0 : outputs[0].size(); }

  void validate() const {
    auto check = [](const std::vector<double>& p, std::size_t n, const std::string& what) {
      detail::require(p.size() == n, what + ": wrong table size");
      double s = 0.0;
      for (double v : p) {
        detail::require(v >= 0.0, what + ": negative probability");
        s += v;
      }
      detail::require(std::abs(s - 1.0) <= 1e-12, what + ": probabilities do not sum to 1");
    };
    const std::size_t A = algorithms(), P = prior_count(), F = models(), n = tasks();
    detail::require(A >= 1 && P >= 1 && F >= 1 && n >= 1, "DiscreteMetaSystem: empty system");
    check(rho, A, "rho");
    check(pi, A, "pi");
    detail::require(hyper_posterior.size() == A && hyper_prior.size() == A && outputs.size() == A,
                    "DiscreteMetaSystem: per-algorithm tables have wrong count");
    for (std::size_t a = 0; a < A; ++a) {
      check(hyper_posterior[a], P, "hyper_posterior[" + std::to_string(a) + "]");
      check(hyper_prior[a], P, "hyper_prior[" + std::to_string(a) + "]");
      detail::require(outputs[a].size() == n, "DiscreteMetaSystem: outputs have inconsistent task count");
      for (std::size_t i = 0; i < n; ++i) check(outputs[a][i], F, "outputs[" + std::to_string(a) + "][" + std::to_string(i) + "]");
    }
    for (std::size_t p = 0; p < P; ++p) check(priors[p], F, "priors[" + std::to_string(p) + "]");
  }
};

struct DecompositionCheck {
  double lhs = 0.0;  // KL of the joint generating processes, by enumeration
  double rhs = 0.0;  // KL(rho||pi) + E_rho[KL(Q(A)||P(A)) + E_{P~Q(A)} sum_i KL(A(S_i)||P)]
  double max_abs_diff = 0.0;
};

namespace detail {

inline double discrete_kl(const std::vector<double>& q, const std::vector<double>& p, const std::string& what) {
  double s = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (q[k] == 0.0) continue;
    if (p[k] == 0.0) throw DomainError("support violation in " + what + " at index " + std::to_string(k));
    s += q[k] * std::log(q[k] / p[k]);
  }
  return s;
}

}  // namespace detail

inline DecompositionCheck kl_decomposition_check(const DiscreteMetaSystem& sys) {
  sys.validate();
  const std::size_t A = sys.algorithms(), P = sys.prior_count(), F = sys.models(), n = sys.tasks();

  // Left side: enumerate every tuple (a, p, f_1..f_n).
  double lhs = 0.0;
  std::vector<std::size_t> f(n, 0);
  for (std::size_t a = 0; a < A; ++a) {
    for (std::size_t p = 0; p < P; ++p) {
      std::fill(f.begin(), f.end(), 0);
      while (true) {
        double q = sys.rho[a] * sys.hyper_posterior[a][p];
        double r = sys.pi[a] * sys.hyper_prior[a][p];
        for (std::size_t i = 0; i < n; ++i) {
          q *= sys.outputs[a][i][f[i]];
          r *= sys.priors[p][f[i]];
        }
        if (q > 0.0) {
          if (r == 0.0) {
            std::string tuple = "(A=" + std::to_string(a) + ", P=" + std::to_string(p);
            for (std::size_t i = 0; i < n; ++i) tuple += ", f" + std::to_string(i + 1) + "=" + std::to_string(f[i]);
            throw DomainError("kl_decomposition_check: joint prior has zero mass at tuple " + tuple + ")");
          }
          lhs += q * std::log(q / r);
        }
        std::size_t k = 0;
        while (k < n && ++f[k] == F) f[k++] = 0;
        if (k == n) break;
      }
    }
  }

  // Right side: the chain rule.
  double rhs = detail::discrete_kl(sys.rho, sys.pi, "rho||pi");
  for (std::size_t a = 0; a < A; ++a) {
    if (sys.rho[a] == 0.0) continue;
    double inner = detail::discrete_kl(sys.hyper_posterior[a], sys.hyper_prior[a], "Q(A)||P(A)");
    for (std::size_t p = 0; p < P; ++p) {
      if (sys.hyper_posterior[a][p] == 0.0) continue;
      double task_sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) task_sum += detail::discrete_kl(sys.outputs[a][i], sys.priors[p], "A(S_i)||P");
      inner += sys.hyper_posterior[a][p] * task_sum;
    }
    rhs += sys.rho[a] * inner;
  }
  return {lhs, rhs, std::abs(lhs - rhs)};
}

}  // namespace pacmeta
