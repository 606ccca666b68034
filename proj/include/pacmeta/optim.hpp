#pragma once

// First-order optimizers over a flat parameter vector.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pacmeta/error.hpp"

namespace pacmeta {

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Optimizer {
 public:
  Optimizer(std::size_t n, OptimizerConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {
    detail::require(cfg.learning_rate > 0.0, "Optimizer: learning rate must be positive");
  }

  void step(std::span<double> params, std::span<const double> grad) {
    detail::require(params.size() == m_.size() && grad.size() == m_.size(), "Optimizer::step: size mismatch");
    if (cfg_.kind == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg_.learning_rate * grad[i];
      return;
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      const double mhat = m_[i] / bc1;
      const double vhat = v_[i] / bc2;
      params[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }

  std::size_t steps() const { return t_; }

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

inline OptimizerKind parse_optimizer_kind(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw DomainError("unknown optimizer '" + s + "' (expected adam|sgd)");
}

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

}  // namespace pacmeta
