#pragma once

// Stochastic classifiers whose weights follow a diagonal Gaussian posterior,
// bounded losses, and Monte-Carlo risk estimates (plain and on a tape).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pacmeta/diff.hpp"
#include "pacmeta/error.hpp"
#include "pacmeta/gauss.hpp"
#include "pacmeta/rng.hpp"

namespace pacmeta {

/// Labelled samples, features stored row-major.
struct Dataset {
  std::size_t dim = 0;
  std::vector<double> x;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
  bool empty() const { return y.empty(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, dim}; }

  void push_back(std::span<const double> xi, int yi) {
    detail::require(xi.size() == dim, "Dataset::push_back: feature dimension mismatch");
    x.insert(x.end(), xi.begin(), xi.end());
    y.push_back(yi);
  }

  Dataset subset(std::span<const std::size_t> idx) const {
    Dataset out{dim, {}, {}};
    out.x.reserve(idx.size() * dim);
    out.y.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(row(i), y[i]);
    return out;
  }
};

enum class ModelKind { linear, mlp1 };

/// linear: score = w.x, predicted label 1 iff score <= 0 (two classes, no bias).
/// mlp1: logits = tanh(x W1 + b1) W2 + b2.
struct ModelArchitecture {
  ModelKind kind = ModelKind::linear;
  std::size_t input_dim = 2;
  std::size_t hidden_dim = 0;
  std::size_t num_classes = 2;

  static ModelArchitecture linear(std::size_t d) { return {ModelKind::linear, d, 0, 2}; }
  static ModelArchitecture mlp1(std::size_t in, std::size_t hidden, std::size_t classes) {
    return {ModelKind::mlp1, in, hidden, classes};
  }

  void validate() const {
    detail::require(input_dim > 0, "ModelArchitecture: input_dim must be positive");
    if (kind == ModelKind::linear) {
      detail::require(hidden_dim == 0, "ModelArchitecture: linear model has no hidden layer");
      detail::require(num_classes == 2, "ModelArchitecture: linear model is binary");
    } else {
      detail::require(hidden_dim > 0 && num_classes >= 2, "ModelArchitecture: mlp1 needs hidden_dim > 0 and >= 2 classes");
    }
  }

  std::size_t parameter_count() const {
    if (kind == ModelKind::linear) return input_dim;
    return input_dim * hidden_dim + hidden_dim + hidden_dim * num_classes + num_classes;
  }

  bool operator==(const ModelArchitecture&) const = default;
};

inline const char* to_string(ModelKind k) { return k == ModelKind::linear ? "linear" : "mlp1"; }

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "linear") return ModelKind::linear;
  if (s == "mlp1") return ModelKind::mlp1;
  throw DomainError("unknown model kind '" + s + "' (expected linear|mlp1)");
}

enum class LossKind { zero_one, logistic_clipped, cross_entropy_clipped };

/// Raw losses are mapped into [0, 1] by min(raw, clip_max) / clip_max.
struct LossSpec {
  LossKind kind = LossKind::zero_one;
  double clip_max = 4.0;

  void validate() const { detail::require(clip_max > 0.0, "LossSpec: clip_max must be positive"); }
};

inline const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::zero_one: return "zero_one";
    case LossKind::logistic_clipped: return "logistic_clipped";
    case LossKind::cross_entropy_clipped: return "cross_entropy_clipped";
  }
  return "?";
}

inline LossKind parse_loss_kind(const std::string& s) {
  if (s == "zero_one") return LossKind::zero_one;
  if (s == "logistic_clipped") return LossKind::logistic_clipped;
  if (s == "cross_entropy_clipped") return LossKind::cross_entropy_clipped;
  throw DomainError("unknown loss '" + s + "'");
}

struct StochasticModel {
  ModelArchitecture arch;
  DiagonalGaussian posterior;

  void validate() const {
    arch.validate();
    posterior.validate();
    detail::require(posterior.dim() == arch.parameter_count(), "StochasticModel: posterior dimension " +
                                                                    std::to_string(posterior.dim()) +
                                                                    " != parameter count " +
                                                                    std::to_string(arch.parameter_count()));
  }
};

// ---------------------------------------------------------------------------
// Deterministic evaluation for a fixed weight vector.

namespace detail {

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double clip_scale(double raw, double clip_max) { return std::min(raw, clip_max) / clip_max; }

/// +1 for label 1, -1 for label 0: the logistic loss of the linear rule is softplus(sign * score).
inline double label_sign(int y) { return y == 1 ? 1.0 : -1.0; }

}  // namespace detail

/// Class scores for one input: {w.x} for linear, logits for mlp1.
inline std::vector<double> predict(std::span<const double> w, const ModelArchitecture& arch, std::span<const double> x) {
  detail::require(w.size() == arch.parameter_count(), "predict: weight vector has wrong size");
  detail::require(x.size() == arch.input_dim, "predict: input dimension mismatch");
  if (arch.kind == ModelKind::linear) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * x[i];
    return {s};
  }
  const std::size_t in = arch.input_dim, h = arch.hidden_dim, c = arch.num_classes;
  const double* W1 = w.data();
  const double* b1 = W1 + in * h;
  const double* W2 = b1 + h;
  const double* b2 = W2 + h * c;
  std::vector<double> hidden(h);
  for (std::size_t j = 0; j < h; ++j) {
    double a = b1[j];
    for (std::size_t i = 0; i < in; ++i) a += x[i] * W1[i * h + j];
    hidden[j] = std::tanh(a);
  }
  std::vector<double> logits(b2, b2 + c);
  for (std::size_t j = 0; j < h; ++j)
    for (std::size_t k = 0; k < c; ++k) logits[k] += hidden[j] * W2[j * c + k];
  return logits;
}

inline int label_from_scores(const ModelArchitecture& arch, const std::vector<double>& scores) {
  if (arch.kind == ModelKind::linear) return scores[0] <= 0.0 ? 1 : 0;
  return int(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

inline int predict_label(std::span<const double> w, const ModelArchitecture& arch, std::span<const double> x) {
  return label_from_scores(arch, predict(w, arch, x));
}

/// Loss in [0, 1] of one sample given its scores.
inline double sample_loss(const ModelArchitecture& arch, const std::vector<double>& scores, int y, const LossSpec& loss) {
  switch (loss.kind) {
    case LossKind::zero_one:
      return label_from_scores(arch, scores) == y ? 0.0 : 1.0;
    case LossKind::logistic_clipped:
      detail::require(arch.kind == ModelKind::linear, "logistic_clipped loss requires the linear model");
      return detail::clip_scale(detail::softplus(detail::label_sign(y) * scores[0]), loss.clip_max);
    case LossKind::cross_entropy_clipped: {
      if (arch.kind == ModelKind::linear) {
        return detail::clip_scale(detail::softplus(detail::label_sign(y) * scores[0]), loss.clip_max);
      }
      const double mx = *std::max_element(scores.begin(), scores.end());
      double z = 0.0;
      for (double s : scores) z += std::exp(s - mx);
      return detail::clip_scale(mx + std::log(z) - scores[std::size_t(y)], loss.clip_max);
    }
  }
  return 1.0;
}

/// Mean loss of a fixed weight vector over a dataset.
inline double dataset_loss(std::span<const double> w, const ModelArchitecture& arch, const Dataset& data,
                           const LossSpec& loss) {
  detail::require(!data.empty(), "dataset_loss: empty dataset");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) total += sample_loss(arch, predict(w, arch, data.row(i)), data.y[i], loss);
  return total / double(data.size());
}

/// E_{w ~ posterior} of the mean dataset loss, estimated with `mc_samples` draws.
inline double mc_empirical_risk(const StochasticModel& model, const Dataset& data, const LossSpec& loss,
                                std::size_t mc_samples, Rng& rng) {
  detail::require(!data.empty(), "mc_empirical_risk: empty dataset");
  detail::require(mc_samples > 0, "mc_empirical_risk: mc_samples must be positive");
  double total = 0.0;
  for (std::size_t k = 0; k < mc_samples; ++k) {
    const auto w = sample(model.posterior, rng);
    total += dataset_loss(w, model.arch, data, loss);
  }
  return total / double(mc_samples);
}

// ---------------------------------------------------------------------------
// Tape versions.

/// mean + exp(log_var / 2) * eps, differentiable in mean and log_var.
inline Var reparametrize(Var mean, Var log_var, std::span<const double> eps) {
  Tape& t = *mean.tape;
  const Var noise = t.constant(Tensor{mean.value().shape, std::vector<double>(eps.begin(), eps.end())});
  return mean + exp(log_var * 0.5) * noise;
}

/// Forward pass over a batch: (B x 1) scores for linear, (B x C) logits for mlp1.
inline Var forward(Var weights, const ModelArchitecture& arch, const Dataset& batch) {
  Tape& t = *weights.tape;
  detail::require(weights.value().size() == arch.parameter_count(), "forward: weight vector has wrong size");
  detail::require(batch.dim == arch.input_dim, "forward: input dimension mismatch");
  const Var X = t.constant(Tensor::matrix(batch.size(), batch.dim, batch.x));
  if (arch.kind == ModelKind::linear) {
    return matmul(X, slice(weights, 0, {arch.input_dim, 1}));
  }
  const std::size_t in = arch.input_dim, h = arch.hidden_dim, c = arch.num_classes;
  const Var W1 = slice(weights, 0, {in, h});
  const Var b1 = slice(weights, in * h, {h});
  const Var W2 = slice(weights, in * h + h, {h, c});
  const Var b2 = slice(weights, in * h + h + h * c, {c});
  const Var hidden = tanh(add_row(matmul(X, W1), b1));
  return add_row(matmul(hidden, W2), b2);
}

/// Mean clipped surrogate loss of a weight vector over a batch (scalar node).
inline Var surrogate_loss(Var weights, const ModelArchitecture& arch, const Dataset& batch, const LossSpec& loss) {
  detail::require(!batch.empty(), "surrogate_loss: empty batch");
  if (loss.kind == LossKind::zero_one) throw DomainError("surrogate_loss: zero_one loss is not differentiable");
  const Var scores = forward(weights, arch, batch);
  Var raw;
  if (arch.kind == ModelKind::linear) {
    std::vector<double> signs(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) signs[i] = detail::label_sign(batch.y[i]);
    raw = softplus(scores * weights.tape->constant(Tensor::matrix(batch.size(), 1, std::move(signs))));
  } else {
    if (loss.kind == LossKind::logistic_clipped) throw DomainError("logistic_clipped loss requires the linear model");
    raw = softmax_cross_entropy(scores, batch.y);
  }
  return mean(min_scalar(raw, loss.clip_max)) * (1.0 / loss.clip_max);
}

/// Reparametrized Monte-Carlo estimate of the posterior's empirical risk;
/// one weight draw per entry of `eps`.
inline Var mc_empirical_risk(Var mean_w, Var log_var_w, const ModelArchitecture& arch, const Dataset& batch,
                             const LossSpec& loss, const std::vector<std::vector<double>>& eps) {
  detail::require(!batch.empty(), "mc_empirical_risk: empty dataset");
  detail::require(!eps.empty(), "mc_empirical_risk: need at least one noise draw");
  Var total = surrogate_loss(reparametrize(mean_w, log_var_w, eps[0]), arch, batch, loss);
  for (std::size_t k = 1; k < eps.size(); ++k) {
    total = total + surrogate_loss(reparametrize(mean_w, log_var_w, eps[k]), arch, batch, loss);
  }
  return eps.size() == 1 ? total : total * (1.0 / double(eps.size()));
}

/// KL(q || p) between diagonal Gaussians given as tape nodes.
inline Var kl_divergence(Var q_mean, Var q_log_var, Var p_mean, Var p_log_var) {
  const Var diff = q_mean - p_mean;
  const Var u = q_log_var - p_log_var;
  const Var per_coord = exp(u) - u + diff * diff * exp(-p_log_var) - 1.0;
  return sum(per_coord) * 0.5;
}

/// Glorot-uniform means (biases zero) and log-variances drawn from N(-10, 0.1^2).
inline DiagonalGaussian glorot_init(const ModelArchitecture& arch, Rng& rng) {
  arch.validate();
  const std::size_t n = arch.parameter_count();
  std::vector<double> mean(n, 0.0);
  auto fill = [&](std::size_t offset, std::size_t count, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    for (std::size_t i = 0; i < count; ++i) mean[offset + i] = uniform(rng, -limit, limit);
  };
  if (arch.kind == ModelKind::linear) {
    fill(0, arch.input_dim, arch.input_dim, 1);
  } else {
    const std::size_t in = arch.input_dim, h = arch.hidden_dim, c = arch.num_classes;
    fill(0, in * h, in, h);
    fill(in * h + h, h * c, h, c);
  }
  std::vector<double> log_var(n);
  std::normal_distribution<double> lv(-10.0, 0.1);
  for (auto& v : log_var) v = lv(rng);
  return DiagonalGaussian(std::move(mean), std::move(log_var));
}

}  // namespace pacmeta
