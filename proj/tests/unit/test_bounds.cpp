#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "pacmeta/audit.hpp"
#include "pacmeta/bounds.hpp"

using namespace pacmeta;

namespace {

MetaBoundInput meta_input(double emp, double kl_rho_pi, std::vector<AlgorithmComplexity> algs, std::size_t n,
                          std::size_t m, double delta = 0.1) {
  MetaBoundInput in;
  in.empirical_multitask_risk = emp;
  in.kl_rho_pi = kl_rho_pi;
  in.per_algorithm = std::move(algs);
  in.n = n;
  in.m = m;
  in.delta = delta;
  return in;
}

}  // namespace

TEST(Bounds, MaurerExample) {
  const double v = maurer_bound({0.0, 0.0, 5, 0.1});
  EXPECT_NEAR(v, std::sqrt(std::log(2.0 * std::sqrt(5.0) / 0.1) / 10.0), 1e-15);
  // 0.61649 is quoted from the rounded intermediate sqrt(0.38005); the exact value is 0.616478
  EXPECT_NEAR(v, 0.61649, 2e-5);
  EXPECT_NEAR(v, 0.616478, 1e-6);
}

TEST(Bounds, MaurerLimits) {
  EXPECT_GT(maurer_bound({0.0, 50.0, 5, 0.1}), 1.0);
  EXPECT_LT(maurer_bound({0.2, 0.0, 1000000, 0.1}), 0.21);
  EXPECT_THROW(maurer_bound({0.0, 0.0, 5, 1.0}), DomainError);
  EXPECT_THROW(maurer_bound({0.0, 0.0, 5, 0.0}), DomainError);
  EXPECT_THROW(maurer_bound({1.5, 0.0, 5, 0.1}), DomainError);
  EXPECT_THROW(maurer_bound({0.0, -1.0, 5, 0.1}), DomainError);
}

TEST(Bounds, AdaptationExample) {
  const double v = adaptation_bound(0.0, 0.0, 100, 0.1);
  EXPECT_NEAR(v, std::sqrt((std::log(8000.0) + 1.0) / 200.0), 1e-15);
  EXPECT_NEAR(v, 0.2235, 5e-5);
  EXPECT_LT(v, adaptation_bound(0.0, 0.5, 100, 0.1));
  EXPECT_GT(v, adaptation_bound(0.0, 0.0, 200, 0.1));
}

TEST(Bounds, Theorem1Example) {
  const auto in = meta_input(0.0, 0.0, {{0.0, 0.0, 1.0}}, 10, 5);
  const double a = std::sqrt(std::log(4.0 * std::sqrt(10.0) / 0.1) / 20.0);
  const double b = std::sqrt((std::log(400.0 / 0.1) + 1.0) / 100.0);
  EXPECT_NEAR(theorem1_bound(in), a + b, 1e-15);
  EXPECT_NEAR(theorem1_bound(in), 0.796805, 1e-6);
  // The rounded figure 0.79667 sits within 2e-4 of the exact value.
  EXPECT_NEAR(theorem1_bound(in), 0.79667, 2e-4);
}

TEST(Bounds, TermsRecombine) {
  const auto in = meta_input(0.13, 2.5, {{1.0, 4.0, 1.0}, {0.5, 9.0, 2.0}}, 7, 11);
  for (const auto& t : {theorem1_terms(in), theorem2_terms(in)}) {
    EXPECT_NEAR(t.empirical + t.task_level + t.multitask, t.total, 1e-15);
  }
}

TEST(Bounds, FirstTermVanishesWithManyTasks) {
  EXPECT_LT(task_level_term(3.0, 10000000, 0.1), 0.01);
}

TEST(Bounds, DiracHyperDistributionsReduceC1) {
  // KL(delta_P || delta_P) = 0, so C1 is just the summed task KLs.
  const double c1 = kl_divergence(DiracDistribution{{1.0}}, DiracDistribution{{1.0}}) + 3.5;
  const auto in = meta_input(0.0, 1.0, {{0.0, 3.5, 1.0}}, 4, 6);
  EXPECT_NEAR(theorem1_terms(in).multitask, std::sqrt((1.0 + c1 + std::log(8.0 * 24 / 0.1) + 1.0) / 48.0), 1e-15);
}

TEST(Bounds, Theorem2DropsMetaKlFromSecondTerm) {
  const auto zero = meta_input(0.0, 0.0, {{0.0, 0.0, 1.0}}, 10, 5);
  EXPECT_NEAR(theorem1_terms(zero).multitask, theorem2_terms(zero).multitask, 1e-15);
  const auto two = meta_input(0.0, 2.0, {{0.0, 0.0, 1.0}}, 10, 5);
  EXPECT_NEAR(theorem2_terms(two).multitask, std::sqrt((std::log(4000.0) + 1.0) / 100.0), 1e-15);
  EXPECT_NEAR(theorem1_terms(two).multitask, std::sqrt((2.0 + std::log(4000.0) + 1.0) / 100.0), 1e-15);
  EXPECT_LT(theorem2_terms(two).multitask, theorem1_terms(two).multitask);
}

TEST(Bounds, JensenCases) {
  const double L = std::log(8.0 * 50 / 0.1) + 1.0;
  const auto constant = meta_input(0.0, 0.0, {{0.0, 4.0, 1.0}, {0.0, 4.0, 1.0}}, 10, 5);
  EXPECT_NEAR(theorem2_bound(constant), theorem1_bound(constant), 1e-15);
  const auto mixed = meta_input(0.0, 0.0, {{0.0, 1.0, 1.0}, {0.0, 9.0, 1.0}}, 10, 5);
  const double expected = 0.5 * (std::sqrt((1.0 + L) / 100.0) + std::sqrt((9.0 + L) / 100.0));
  EXPECT_NEAR(theorem2_terms(mixed).multitask, expected, 1e-15);
  EXPECT_LT(expected, std::sqrt((5.0 + L) / 100.0));
  EXPECT_NEAR(theorem1_terms(mixed).multitask, std::sqrt((5.0 + L) / 100.0), 1e-15);
}

TEST(Bounds, Monotonicity) {
  const auto base = meta_input(0.1, 1.0, {{0.5, 2.0, 1.0}}, 5, 5);
  auto more_kl = base;
  more_kl.per_algorithm[0].sum_task_kl = 3.0;
  auto more_meta = base;
  more_meta.kl_rho_pi = 2.0;
  auto tighter = base;
  tighter.delta = 0.01;
  for (auto f : {theorem1_bound, theorem2_bound}) {
    EXPECT_LT(f(base), f(more_kl));
    EXPECT_LT(f(base), f(more_meta));
    EXPECT_LT(f(base), f(tighter));
  }
  EXPECT_LT(task_level_term(1.0, 10, 0.1), task_level_term(1.0, 5, 0.1));
  EXPECT_LT(multitask_sqrt_term(1.0, 5, 10, 0.1), multitask_sqrt_term(1.0, 5, 5, 0.1));
}

TEST(Bounds, RejectsInvalidMetaInputs) {
  EXPECT_THROW(theorem1_bound(meta_input(0.0, -1.0, {{0.0, 0.0, 1.0}}, 5, 5)), DomainError);
  EXPECT_THROW(theorem1_bound(meta_input(0.0, 0.0, {}, 5, 5)), DomainError);
  EXPECT_THROW(theorem2_bound(meta_input(0.0, 0.0, {{0.0, 0.0, 1.0}}, 0, 5)), DomainError);
  EXPECT_THROW(theorem2_bound(meta_input(0.0, 0.0, {{0.0, 0.0, 1.0}}, 5, 5, 1.2)), DomainError);
}

TEST(Bounds, LambdaFormExample) {
  const double delta = 2.0 / std::exp(1.0);
  const double lam = std::sqrt(8.0);
  EXPECT_NEAR(lemma2_lambda_form(0.0, lam, 1, 1, delta), 1.0 / lam + lam / 8.0, 1e-15);
  EXPECT_NEAR(lemma2_lambda_form(0.0, lam, 1, 1, delta), 0.70711, 5e-6);
  EXPECT_THROW(lemma2_lambda_form(0.0, 0.0, 1, 1, 0.1), DomainError);
}

TEST(Bounds, LambdaFormMinimiser) {
  const double kl = 3.0, delta = 0.05;
  const std::size_t n = 4, m = 6;
  const double opt = std::sqrt(8.0 * n * m * (kl + std::log(2.0 / delta)));
  const double at_opt = lemma2_lambda_form(kl, opt, n, m, delta);
  for (double lam = 1.0; lam < 400.0; lam += 0.5) EXPECT_LE(at_opt, lemma2_lambda_form(kl, lam, n, m, delta) + 1e-15);
}

TEST(Bounds, LambdaStarExample) {
  const auto ls = lambda_star(0.0, 2, 5, 0.1);
  EXPECT_NEAR(ls.lambda, std::sqrt(80.0 * std::log(800.0) + 1.0), 1e-12);
  EXPECT_NEAR(ls.lambda, 23.147, 5e-4);
  EXPECT_FALSE(ls.clipped);
  EXPECT_TRUE(lambda_star(1e6, 2, 5, 0.1).clipped);
}

TEST(Bounds, LambdaGridAgreesWithClosedForm) {
  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + uniform_index(rng, 20), m = 1 + uniform_index(rng, 20);
    const double kl = std::exp(uniform(rng, -3.0, 6.0)), delta = uniform(rng, 0.01, 0.5);
    const double nm = double(n * m), X = kl + std::log(8.0 * nm / delta);
    const auto ls = lambda_star(kl, n, m, delta);
    const double S = multitask_sqrt_term(kl, n, m, delta);
    EXPECT_EQ(ls.clipped, ls.lambda > 4.0 * nm);
    if (ls.clipped) {
      EXPECT_GT(S, 1.0);
    } else {
      const double grid = union_grid_minimum(kl, n, m, delta);
      EXPECT_LE(grid, relaxed_lambda_form(kl, ls.lambda, n, m, delta) + 1e-14);
      EXPECT_LE(relaxed_lambda_form(kl, ls.lambda, n, m, delta), S + 1e-14);
      EXPECT_GE(grid, std::sqrt(X / (2.0 * nm)) - 1e-14);
    }
  }
}

TEST(Bounds, DecompositionOfIdenticalJoints) {
  DiscreteMetaSystem sys;
  sys.rho = sys.pi = {0.3, 0.7};
  sys.hyper_posterior = sys.hyper_prior = {{1.0, 0.0}, {0.0, 1.0}};
  sys.priors = {{0.2, 0.3, 0.5}, {0.6, 0.2, 0.2}};
  sys.outputs = {{{0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}}, {{0.6, 0.2, 0.2}, {0.6, 0.2, 0.2}}};
  const auto r = kl_decomposition_check(sys);
  EXPECT_NEAR(r.lhs, 0.0, 1e-15);
  EXPECT_NEAR(r.rhs, 0.0, 1e-15);
}

TEST(Bounds, DecompositionOfRandomSystem) {
  Rng rng(41);
  const auto sys = random_discrete_system(rng, 2, 2, 3, 2);
  const auto r = kl_decomposition_check(sys);
  EXPECT_GT(r.lhs, 0.0);
  EXPECT_LE(r.max_abs_diff, 1e-12);
}

TEST(Bounds, DecompositionPerturbationShiftsBothSidesEqually) {
  DiscreteMetaSystem sys;
  sys.rho = sys.pi = {0.4, 0.6};
  sys.hyper_posterior = sys.hyper_prior = {{0.5, 0.5}, {0.1, 0.9}};
  sys.priors = {{0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}};
  sys.outputs = {{{0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}}, {{0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}}};
  const auto before = kl_decomposition_check(sys);
  sys.outputs[0][1] = {0.6, 0.3, 0.1};
  const auto after = kl_decomposition_check(sys);
  EXPECT_GT(after.lhs, before.lhs);
  EXPECT_GT(after.rhs, before.rhs);
  EXPECT_NEAR(after.lhs - before.lhs, after.rhs - before.rhs, 1e-12);
}

TEST(Bounds, DecompositionReportsSupportViolation) {
  DiscreteMetaSystem sys;
  sys.rho = sys.pi = {1.0};
  sys.hyper_posterior = sys.hyper_prior = {{1.0}};
  sys.priors = {{1.0, 0.0}};
  sys.outputs = {{{0.5, 0.5}}};
  try {
    kl_decomposition_check(sys);
    FAIL() << "expected a support violation";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("f1=1"), std::string::npos) << e.what();
  }
}

TEST(Bounds, DecompositionRejectsUnnormalisedTables) {
  Rng rng(47);
  auto sys = random_discrete_system(rng, 2, 2, 2, 1);
  sys.rho[0] += 1e-6;
  EXPECT_THROW(kl_decomposition_check(sys), DomainError);
}
