#pragma once

// Differentiable versions of the bound expressions, built on a Tape.

#include <cmath>
#include <cstddef>

#include "pacmeta/bounds.hpp"
#include "pacmeta/diff.hpp"

namespace pacmeta::objective {

/// er_hat + sqrt((KL + log(2 sqrt(m)/delta)) / (2m)).
inline Var maurer(Var empirical, Var kl, std::size_t m, double delta) {
  detail::require_delta(delta);
  const double md = double(m);
  return empirical + sqrt((kl + std::log(2.0 * std::sqrt(md) / delta)) * (1.0 / (2.0 * md)));
}

/// er_hat + sqrt((KL + log(8m/delta) + 1) / (2m)).
inline Var adaptation(Var empirical, Var kl, std::size_t m, double delta) {
  detail::require_delta(delta);
  const double md = double(m);
  return empirical + sqrt((kl + (std::log(8.0 * md / delta) + 1.0)) * (1.0 / (2.0 * md)));
}

inline Var task_level(Var kl_rho_pi, std::size_t n, double delta) {
  detail::require_delta(delta);
  const double nd = double(n);
  return sqrt((kl_rho_pi + std::log(4.0 * std::sqrt(nd) / delta)) * (1.0 / (2.0 * nd)));
}

inline Var multitask(Var kl_joint, std::size_t n, std::size_t m, double delta) {
  detail::require_delta(delta);
  const double nm = double(n) * double(m);
  return sqrt((kl_joint + (std::log(8.0 * nm / delta) + 1.0)) * (1.0 / (2.0 * nm)));
}

}  // namespace pacmeta::objective
