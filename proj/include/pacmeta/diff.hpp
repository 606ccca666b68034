#pragma once

// Tape-based reverse-mode automatic differentiation.
//
// The op set is the minimum needed by the bound objectives in this library:
// elementwise arithmetic, matmul with a row-broadcast bias, reductions, a few
// smooth nonlinearities, clipping, slicing of flat parameter vectors and
// softmax cross-entropy. Every node stores its forward value; backward() walks
// the tape once in reverse insertion order, which is a topological order by
// construction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "pacmeta/error.hpp"

namespace pacmeta {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  static Tensor scalar(double v) { return Tensor{{}, {v}}; }
  static Tensor vector(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor{{n}, std::move(v)};
  }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
    detail::require(rows * cols == v.size(), "Tensor::matrix: data size does not match shape");
    return Tensor{{rows, cols}, std::move(v)};
  }
  static Tensor zeros(std::vector<std::size_t> shape) {
    const std::size_t n = element_count(shape);
    return Tensor{std::move(shape), std::vector<double>(n, 0.0)};
  }

  static std::size_t element_count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }
  double item() const {
    detail::require(data.size() == 1, "Tensor::item: tensor is not scalar");
    return data[0];
  }
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

class Tape;

/// Handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  double item() const { return value().item(); }
};

class Gradients {
 public:
  explicit Gradients(std::vector<Tensor> grads) : grads_(std::move(grads)) {}

  /// d(output)/d(v); zeros when v does not influence the output.
  const Tensor& of(Var v) const { return grads_.at(v.id); }

 private:
  std::vector<Tensor> grads_;
};

class Tape {
 public:
  enum class Op : std::uint8_t {
    leaf, constant, add, sub, mul, scale, add_scalar, matmul, add_row, sum, mean,
    exp, log, sqrt, tanh, relu, softplus, min_scalar, slice, softmax_xent
  };

  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value) { return push(Op::leaf, std::move(value), {}, 0.0, true); }
  Var constant(Tensor value) { return push(Op::constant, std::move(value), {}, 0.0, false); }

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }

  Var add(Var a, Var b) { return binary(Op::add, a, b); }
  Var sub(Var a, Var b) { return binary(Op::sub, a, b); }
  Var mul(Var a, Var b) { return binary(Op::mul, a, b); }

  Var scale(Var a, double c) {
    Tensor out = value(a);
    for (auto& x : out.data) x *= c;
    return push(Op::scale, std::move(out), {a.id}, c);
  }

  Var add_scalar(Var a, double c) {
    Tensor out = value(a);
    for (auto& x : out.data) x += c;
    return push(Op::add_scalar, std::move(out), {a.id}, c);
  }

  /// (r x k) * (k x c) -> (r x c).
  Var matmul(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows()) {
      throw DomainError("matmul: incompatible shapes " + shape_string(A.shape) + " and " + shape_string(B.shape));
    }
    const std::size_t r = A.rows(), k = A.cols(), c = B.cols();
    Tensor out = Tensor::zeros({r, c});
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = A.data[i * k + p];
        if (aip == 0.0) continue;
        const double* brow = &B.data[p * c];
        double* orow = &out.data[i * c];
        for (std::size_t j = 0; j < c; ++j) orow[j] += aip * brow[j];
      }
    }
    return push(Op::matmul, std::move(out), {a.id, b.id});
  }

  /// Adds a length-c vector to every row of an (r x c) matrix.
  Var add_row(Var m, Var row) {
    const Tensor& M = value(m);
    const Tensor& R = value(row);
    if (M.rank() != 2 || R.size() != M.cols()) {
      throw DomainError("add_row: incompatible shapes " + shape_string(M.shape) + " and " + shape_string(R.shape));
    }
    Tensor out = M;
    const std::size_t c = M.cols();
    for (std::size_t i = 0; i < M.rows(); ++i)
      for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] += R.data[j];
    return push(Op::add_row, std::move(out), {m.id, row.id});
  }

  Var sum(Var a) {
    const auto& d = value(a).data;
    return push(Op::sum, Tensor::scalar(std::accumulate(d.begin(), d.end(), 0.0)), {a.id});
  }

  Var mean(Var a) {
    const auto& d = value(a).data;
    return push(Op::mean, Tensor::scalar(std::accumulate(d.begin(), d.end(), 0.0) / double(d.size())), {a.id});
  }

  Var exp(Var a) { return unary(Op::exp, a, [](double x) { return std::exp(x); }); }

  Var log(Var a) {
    for (double x : value(a).data)
      if (!(x > 0.0)) throw DomainError("log: non-positive input " + std::to_string(x));
    return unary(Op::log, a, [](double x) { return std::log(x); });
  }

  Var sqrt(Var a) {
    for (double x : value(a).data)
      if (!(x > 0.0)) throw DomainError("sqrt: non-positive input " + std::to_string(x));
    return unary(Op::sqrt, a, [](double x) { return std::sqrt(x); });
  }

  Var tanh(Var a) { return unary(Op::tanh, a, [](double x) { return std::tanh(x); }); }
  Var relu(Var a) { return unary(Op::relu, a, [](double x) { return x > 0.0 ? x : 0.0; }); }

  /// log(1 + e^x), evaluated without overflow.
  Var softplus(Var a) {
    return unary(Op::softplus, a, [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); });
  }

  /// min(x, c) elementwise; the derivative is 1 strictly below c and 0 otherwise.
  Var min_scalar(Var a, double c) {
    Tensor out = value(a);
    for (auto& x : out.data) x = std::min(x, c);
    return push(Op::min_scalar, std::move(out), {a.id}, c);
  }

  /// Contiguous view [offset, offset + prod(shape)) of the flattened input, reshaped.
  Var slice(Var a, std::size_t offset, std::vector<std::size_t> shape) {
    const Tensor& A = value(a);
    const std::size_t n = Tensor::element_count(shape);
    if (offset + n > A.size()) {
      throw DomainError("slice: range [" + std::to_string(offset) + ", " + std::to_string(offset + n) +
                        ") exceeds input of size " + std::to_string(A.size()));
    }
    Tensor out{std::move(shape), std::vector<double>(A.data.begin() + long(offset), A.data.begin() + long(offset + n))};
    return push(Op::slice, std::move(out), {a.id}, double(offset));
  }

  /// Row-wise softmax cross-entropy of (B x C) logits against B labels -> length-B losses.
  Var softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
    const Tensor& L = value(logits);
    if (L.rank() != 2 || L.rows() != labels.size()) {
      throw DomainError("softmax_cross_entropy: logits " + shape_string(L.shape) + " vs " +
                        std::to_string(labels.size()) + " labels");
    }
    const std::size_t b = L.rows(), c = L.cols();
    Tensor out = Tensor::zeros({b});
    std::vector<double> probs(b * c);
    for (std::size_t i = 0; i < b; ++i) {
      const int y = labels[i];
      if (y < 0 || std::size_t(y) >= c) throw DomainError("softmax_cross_entropy: label out of range");
      const double* row = &L.data[i * c];
      const double mx = *std::max_element(row, row + c);
      double z = 0.0;
      for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - lse);
      out.data[i] = lse - row[y];
    }
    Var v = push(Op::softmax_xent, std::move(out), {logits.id});
    nodes_.back().saved = std::move(probs);
    nodes_.back().labels = labels;
    return v;
  }

  /// Reverse pass from a scalar output.
  Gradients backward(Var output) const {
    const Tensor& out = value(output);
    if (out.size() != 1) throw DomainError("backward: output must be scalar, got " + shape_string(out.shape));
    std::vector<Tensor> grads(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) grads[i] = Tensor{nodes_[i].value.shape, {}};
    grads[output.id].data.assign(1, 1.0);
    for (std::size_t k = output.id + 1; k-- > 0;) {
      const Node& node = nodes_[k];
      if (!node.requires_grad || grads[k].data.empty()) continue;
      propagate(k, grads);
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (grads[i].data.empty()) grads[i].data.assign(nodes_[i].value.size(), 0.0);
    return Gradients(std::move(grads));
  }

 private:
  struct Node {
    Op op;
    Tensor value;
    std::vector<std::uint32_t> inputs;
    double param = 0.0;
    bool requires_grad = false;
    std::vector<double> saved;
    std::vector<int> labels;
  };

  static void check_finite(const Tensor& t, Op op) {
    for (double x : t.data) {
      if (!std::isfinite(x)) throw NumericError("non-finite value produced by tape op #" + std::to_string(int(op)));
    }
  }

  Var push(Op op, Tensor value, std::vector<std::uint32_t> inputs, double param = 0.0, bool leaf_grad = false) {
    check_finite(value, op);
    bool rg = leaf_grad;
    for (auto in : inputs) rg = rg || nodes_[in].requires_grad;
    nodes_.push_back(Node{op, std::move(value), std::move(inputs), param, rg, {}, {}});
    return Var{this, std::uint32_t(nodes_.size() - 1)};
  }

  Var binary(Op op, Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.shape != B.shape) {
      throw DomainError("elementwise op: shape mismatch " + shape_string(A.shape) + " vs " + shape_string(B.shape));
    }
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) {
      switch (op) {
        case Op::add: out.data[i] += B.data[i]; break;
        case Op::sub: out.data[i] -= B.data[i]; break;
        default: out.data[i] *= B.data[i]; break;
      }
    }
    return push(op, std::move(out), {a.id, b.id});
  }

  template <class F>
  Var unary(Op op, Var a, F f) {
    Tensor out = value(a);
    for (auto& x : out.data) x = f(x);
    return push(op, std::move(out), {a.id});
  }

  static void accumulate(Tensor& g, std::size_t n) {
    if (g.data.empty()) g.data.assign(n, 0.0);
  }

  void propagate(std::size_t k, std::vector<Tensor>& grads) const {
    const Node& node = nodes_[k];
    const std::vector<double>& go = grads[k].data;
    auto grad_of = [&](std::size_t idx) -> std::vector<double>& {
      const std::uint32_t in = node.inputs[idx];
      accumulate(grads[in], nodes_[in].value.size());
      return grads[in].data;
    };
    auto needs = [&](std::size_t idx) { return nodes_[node.inputs[idx]].requires_grad; };
    auto in_value = [&](std::size_t idx) -> const std::vector<double>& { return nodes_[node.inputs[idx]].value.data; };
    const std::vector<double>& y = node.value.data;

    switch (node.op) {
      case Op::leaf:
      case Op::constant:
        break;
      case Op::add:
        if (needs(0)) { auto& g = grad_of(0); for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i]; }
        if (needs(1)) { auto& g = grad_of(1); for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i]; }
        break;
      case Op::sub:
        if (needs(0)) { auto& g = grad_of(0); for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i]; }
        if (needs(1)) { auto& g = grad_of(1); for (std::size_t i = 0; i < go.size(); ++i) g[i] -= go[i]; }
        break;
      case Op::mul: {
        const auto& a = in_value(0);
        const auto& b = in_value(1);
        if (needs(0)) { auto& g = grad_of(0); for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * b[i]; }
        if (needs(1)) { auto& g = grad_of(1); for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * a[i]; }
        break;
      }
      case Op::scale: {
        auto& g = grad_of(0);
        for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * node.param;
        break;
      }
      case Op::add_scalar: {
        auto& g = grad_of(0);
        for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
        break;
      }
      case Op::matmul: {
        const Tensor& A = nodes_[node.inputs[0]].value;
        const Tensor& B = nodes_[node.inputs[1]].value;
        const std::size_t r = A.rows(), kk = A.cols(), c = B.cols();
        if (needs(0)) {
          auto& g = grad_of(0);  // dA = dY * B^T
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t p = 0; p < kk; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < c; ++j) acc += go[i * c + j] * B.data[p * c + j];
              g[i * kk + p] += acc;
            }
        }
        if (needs(1)) {
          auto& g = grad_of(1);  // dB = A^T * dY
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t p = 0; p < kk; ++p) {
              const double aip = A.data[i * kk + p];
              if (aip == 0.0) continue;
              for (std::size_t j = 0; j < c; ++j) g[p * c + j] += aip * go[i * c + j];
            }
        }
        break;
      }
      case Op::add_row: {
        const std::size_t c = node.value.cols();
        if (needs(0)) { auto& g = grad_of(0); for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i]; }
        if (needs(1)) {
          auto& g = grad_of(1);
          for (std::size_t i = 0; i < go.size(); ++i) g[i % c] += go[i];
        }
        break;
      }
      case Op::sum: {
        auto& g = grad_of(0);
        for (auto& x : g) x += go[0];
        break;
      }
      case Op::mean: {
        auto& g = grad_of(0);
        const double s = go[0] / double(g.size());
        for (auto& x : g) x += s;
        break;
      }
      case Op::exp: {
        auto& g = grad_of(0);
        for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * y[i];
        break;
      }
      case Op::log: {
        const auto& a = in_value(0);
        auto& g = grad_of(0);
        for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] / a[i];
        break;
      }
      case Op::sqrt: {
        auto& g = grad_of(0);
        for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * 0.5 / y[i];
        break;
      }
      case Op::tanh: {
        auto& g = grad_of(0);
        for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case Op::relu: {
        const auto& a = in_value(0);
        auto& g = grad_of(0);
        for (std::size_t i = 0; i < go.size(); ++i) g[i] += a[i] > 0.0 ? go[i] : 0.0;
        break;
      }
      case Op::softplus: {
        const auto& a = in_value(0);
        auto& g = grad_of(0);
        for (std::size_t i = 0; i < go.size(); ++i) {
          const double s = a[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-a[i])) : std::exp(a[i]) / (1.0 + std::exp(a[i]));
          g[i] += go[i] * s;
        }
        break;
      }
      case Op::min_scalar: {
        const auto& a = in_value(0);
        auto& g = grad_of(0);
        for (std::size_t i = 0; i < go.size(); ++i) g[i] += a[i] < node.param ? go[i] : 0.0;
        break;
      }
      case Op::slice: {
        auto& g = grad_of(0);
        const auto offset = std::size_t(node.param);
        for (std::size_t i = 0; i < go.size(); ++i) g[offset + i] += go[i];
        break;
      }
      case Op::softmax_xent: {
        auto& g = grad_of(0);
        const std::size_t b = node.labels.size();
        const std::size_t c = b ? node.saved.size() / b : 0;
        for (std::size_t i = 0; i < b; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            const double onehot = std::size_t(node.labels[i]) == j ? 1.0 : 0.0;
            g[i * c + j] += go[i] * (node.saved[i * c + j] - onehot);
          }
        }
        break;
      }
    }
  }

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value(*this); }

inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape->mul(a, b); }
inline Var operator+(Var a, double c) { return a.tape->add_scalar(a, c); }
inline Var operator+(double c, Var a) { return a.tape->add_scalar(a, c); }
inline Var operator-(Var a, double c) { return a.tape->add_scalar(a, -c); }
inline Var operator*(Var a, double c) { return a.tape->scale(a, c); }
inline Var operator*(double c, Var a) { return a.tape->scale(a, c); }
inline Var operator/(Var a, double c) { return a.tape->scale(a, 1.0 / c); }
inline Var operator-(Var a) { return a.tape->scale(a, -1.0); }

inline Var matmul(Var a, Var b) { return a.tape->matmul(a, b); }
inline Var add_row(Var m, Var row) { return m.tape->add_row(m, row); }
inline Var sum(Var a) { return a.tape->sum(a); }
inline Var mean(Var a) { return a.tape->mean(a); }
inline Var exp(Var a) { return a.tape->exp(a); }
inline Var log(Var a) { return a.tape->log(a); }
inline Var sqrt(Var a) { return a.tape->sqrt(a); }
inline Var tanh(Var a) { return a.tape->tanh(a); }
inline Var relu(Var a) { return a.tape->relu(a); }
inline Var softplus(Var a) { return a.tape->softplus(a); }
inline Var min_scalar(Var a, double c) { return a.tape->min_scalar(a, c); }
inline Var slice(Var a, std::size_t offset, std::vector<std::size_t> shape) {
  return a.tape->slice(a, offset, std::move(shape));
}
inline Var softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
  return logits.tape->softmax_cross_entropy(logits, labels);
}

/// Builds a scalar objective on the given tape from a single flat input leaf.
using ScalarObjective = std::function<Var(Tape&, Var)>;

/// Value of `f` at `point` without recording gradients of interest.
inline double evaluate(const ScalarObjective& f, const Tensor& point) {
  Tape tape;
  return f(tape, tape.leaf(point)).item();
}

/// Analytic gradient of `f` at `point`.
inline std::vector<double> gradient(const ScalarObjective& f, const Tensor& point) {
  Tape tape;
  const Var x = tape.leaf(point);
  const Var y = f(tape, x);
  return tape.backward(y).of(x).data;
}

/// Worst per-coordinate relative error between the tape gradient and central
/// differences with step h. The denominator is max(|analytic|, |numeric|, 1e-8).
inline double gradcheck(const ScalarObjective& f, const Tensor& point, double h = 1e-5) {
  detail::require(h > 0.0, "gradcheck: step must be positive");
  const std::vector<double> analytic = gradient(f, point);
  double worst = 0.0;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe.data[i] = point.data[i] + h;
    const double up = evaluate(f, probe);
    probe.data[i] = point.data[i] - h;
    const double down = evaluate(f, probe);
    probe.data[i] = point.data[i];
    const double numeric = (up - down) / (2.0 * h);
    if (!std::isfinite(numeric)) throw NumericError("gradcheck: non-finite finite difference at coordinate " + std::to_string(i));
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace pacmeta
