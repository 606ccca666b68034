#pragma once

// Diagonal Gaussian and Dirac distributions over weight vectors.
//
// Variances are stored as natural-log variances so that gradient steps never
// leave the valid parameter space.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pacmeta/error.hpp"
#include "pacmeta/rng.hpp"

namespace pacmeta {

struct DiagonalGaussian {
  std::vector<double> mean;
  std::vector<double> log_var;

  DiagonalGaussian() = default;
  DiagonalGaussian(std::vector<double> mean_, std::vector<double> log_var_)
      : mean(std::move(mean_)), log_var(std::move(log_var_)) {
    validate();
  }

  /// N(mean, variance * I).
  static DiagonalGaussian isotropic(std::vector<double> mean, double variance) {
    detail::require(variance > 0.0 && std::isfinite(variance), "isotropic: variance must be positive");
    const std::size_t d = mean.size();
    return DiagonalGaussian(std::move(mean), std::vector<double>(d, std::log(variance)));
  }

  std::size_t dim() const { return mean.size(); }
  double variance(std::size_t i) const { return std::exp(log_var[i]); }

  void validate() const {
    detail::require(!mean.empty(), "DiagonalGaussian: dimension must be >= 1");
    detail::require(mean.size() == log_var.size(), "DiagonalGaussian: mean/log_var dimension mismatch");
    for (std::size_t i = 0; i < mean.size(); ++i) {
      detail::require(std::isfinite(mean[i]) && std::isfinite(log_var[i]),
                      "DiagonalGaussian: non-finite parameter at index " + std::to_string(i));
    }
  }

  bool operator==(const DiagonalGaussian&) const = default;
};

struct DiracDistribution {
  std::vector<double> point;

  std::size_t dim() const { return point.size(); }
  bool operator==(const DiracDistribution&) const = default;
};

/// KL(q || p) for diagonal Gaussians, summed over coordinates.
inline double kl_divergence(const DiagonalGaussian& q, const DiagonalGaussian& p) {
  detail::require(q.dim() == p.dim(), "kl_divergence: dimension mismatch (" + std::to_string(q.dim()) +
                                          " vs " + std::to_string(p.dim()) + ")");
  double total = 0.0;
  for (std::size_t i = 0; i < q.dim(); ++i) {
    const double u = q.log_var[i] - p.log_var[i];
    const double diff = q.mean[i] - p.mean[i];
    // 0.5 * (r - 1 - log r) with r = var_q / var_p, plus the mean term.
    const double var_part = std::max(0.0, std::expm1(u) - u);
    total += 0.5 * (var_part + diff * diff * std::exp(-p.log_var[i]));
  }
  return total;
}

/// KL between Diracs: zero for identical points, undefined otherwise.
inline double kl_divergence(const DiracDistribution& q, const DiracDistribution& p) {
  detail::require(q.dim() == p.dim(), "kl_divergence: Dirac dimension mismatch");
  if (q.point != p.point) throw DomainError("kl_divergence: KL between distinct Diracs is infinite");
  return 0.0;
}

inline double kl_divergence(const DiracDistribution&, const DiagonalGaussian&) {
  throw DomainError("kl_divergence: Dirac vs Gaussian is not absolutely continuous");
}

inline double kl_divergence(const DiagonalGaussian&, const DiracDistribution&) {
  throw DomainError("kl_divergence: Gaussian vs Dirac is not absolutely continuous");
}

inline std::vector<double> sample(const DiagonalGaussian& dist, Rng& rng) {
  std::vector<double> out(dist.dim());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = dist.mean[i] + std::exp(0.5 * dist.log_var[i]) * normal(rng);
  }
  return out;
}

inline std::vector<double> sample(const DiracDistribution& dist, Rng&) { return dist.point; }

/// E_{mu ~ hyper} KL(q || N(mu, prior_var * I)).
///
/// The mean enters KL only through ||mu_q - mu||^2 / (2 prior_var), whose
/// expectation adds the hyper-distribution's variance to the squared distance.
inline double expected_kl_under_gaussian_mean(const DiagonalGaussian& q, const DiagonalGaussian& hyper,
                                              double prior_var) {
  detail::require(q.dim() == hyper.dim(), "expected_kl_under_gaussian_mean: dimension mismatch");
  detail::require(prior_var > 0.0 && std::isfinite(prior_var), "expected_kl_under_gaussian_mean: prior_var must be > 0");
  const DiagonalGaussian centred(hyper.mean, std::vector<double>(q.dim(), std::log(prior_var)));
  double spread = 0.0;
  for (std::size_t i = 0; i < hyper.dim(); ++i) spread += hyper.variance(i);
  return kl_divergence(q, centred) + spread / (2.0 * prior_var);
}

}  // namespace pacmeta
