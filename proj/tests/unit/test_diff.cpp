#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "pacmeta/diff.hpp"
#include "pacmeta/model.hpp"
#include "pacmeta/rng.hpp"

using namespace pacmeta;

TEST(Diff, MatmulShape) {
  Tape t;
  const Var a = t.constant(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  const Var b = t.constant(Tensor::matrix(3, 1, {1, 0, -1}));
  const Var c = matmul(a, b);
  EXPECT_EQ(c.value().shape, (std::vector<std::size_t>{2, 1}));
  EXPECT_EQ(c.value().data, (std::vector<double>{-2, -2}));
  EXPECT_THROW(matmul(b, b), DomainError);
}

TEST(Diff, SoftmaxCrossEntropyOfUniformLogits) {
  Tape t;
  const Var logits = t.constant(Tensor::matrix(1, 2, {0.0, 0.0}));
  EXPECT_NEAR(softmax_cross_entropy(logits, {0}).value().data[0], std::log(2.0), 1e-15);
  EXPECT_NEAR(std::log(2.0), 0.6931, 1e-4);
}

TEST(Diff, SoftmaxCrossEntropyIsStableForLargeLogits) {
  Tape t;
  const Var logits = t.constant(Tensor::matrix(1, 3, {1000.0, 0.0, -1000.0}));
  EXPECT_NEAR(softmax_cross_entropy(logits, {1}).value().data[0], 1000.0, 1e-9);
}

TEST(Diff, Relu) {
  Tape t;
  const Var x = t.leaf(Tensor::vector({-1.0, 2.0}));
  EXPECT_EQ(relu(x).value().data, (std::vector<double>{0.0, 2.0}));
  const auto g = t.backward(sum(relu(x))).of(x).data;
  EXPECT_EQ(g, (std::vector<double>{0.0, 1.0}));
}

TEST(Diff, SquareGradient) {
  Tape t;
  const Var x = t.leaf(Tensor::scalar(3.0));
  EXPECT_EQ(t.backward(x * x).of(x).data[0], 6.0);
}

TEST(Diff, GradientAccumulatesOverReuse) {
  Tape t;
  const Var x = t.leaf(Tensor::vector({1.0, 2.0}));
  const Var y = sum(x * x + x * 3.0 + exp(x));
  const auto g = t.backward(y).of(x).data;
  EXPECT_NEAR(g[0], 2.0 + 3.0 + std::exp(1.0), 1e-14);
  EXPECT_NEAR(g[1], 4.0 + 3.0 + std::exp(2.0), 1e-13);
}

TEST(Diff, DomainErrors) {
  Tape t;
  const Var x = t.leaf(Tensor::vector({-1.0, 2.0}));
  EXPECT_THROW(log(x), DomainError);
  EXPECT_THROW(sqrt(x), DomainError);
  EXPECT_THROW(x + t.leaf(Tensor::vector({1.0})), DomainError);
  EXPECT_THROW(t.backward(x), DomainError);
  EXPECT_THROW(slice(x, 1, {2}), DomainError);
}

TEST(Diff, NonFiniteValuesAreReported) {
  Tape t;
  const Var x = t.leaf(Tensor::scalar(1000.0));
  EXPECT_THROW(exp(x), NumericError);
}

TEST(Diff, GradcheckQuadraticForm) {
  const std::vector<double> A{2.0, 0.5, -1.0, 0.5, 3.0, 0.2, -1.0, 0.2, 1.5};
  const ScalarObjective f = [&](Tape& t, Var x) {
    const Var M = t.constant(Tensor::matrix(3, 3, A));
    const Var col = slice(x, 0, {3, 1});
    const Var Ax = matmul(M, col);
    return sum(Ax * col);
  };
  EXPECT_LE(gradcheck(f, Tensor::vector({0.3, -1.2, 0.8})), 1e-9);
}

TEST(Diff, GradcheckRandomComposite) {
  Rng rng(5);
  const std::size_t in = 4, h1 = 5, h2 = 3;
  const auto X = standard_normal_vector(rng, 6 * in);
  const ScalarObjective f = [&](Tape& t, Var w) {
    const Var x = t.constant(Tensor::matrix(6, in, X));
    const Var W1 = slice(w, 0, {in, h1});
    const Var W2 = slice(w, in * h1, {h1, h2});
    const Var b2 = slice(w, in * h1 + h1 * h2, {h2});
    const Var W3 = slice(w, in * h1 + h1 * h2 + h2, {h2, 2});
    const Var a1 = tanh(matmul(x, W1));
    const Var a2 = softplus(add_row(matmul(a1, W2), b2));
    const Var logits = matmul(a2, W3);
    return mean(softmax_cross_entropy(logits, {0, 1, 1, 0, 1, 0})) + sqrt(sum(exp(a2)) + 1.0);
  };
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = standard_normal_vector(rng, in * h1 + h1 * h2 + h2 + 2 * h2);
    EXPECT_LE(gradcheck(f, Tensor::vector(p)), 1e-4);
  }
}

TEST(Diff, GradcheckGaussianKl) {
  Rng rng(11);
  const auto pm = standard_normal_vector(rng, 3);
  const auto plv = standard_normal_vector(rng, 3);
  const ScalarObjective f = [&](Tape& t, Var q) {
    return kl_divergence(slice(q, 0, {3}), slice(q, 3, {3}), t.constant(Tensor::vector(pm)),
                         t.constant(Tensor::vector(plv)));
  };
  EXPECT_LE(gradcheck(f, Tensor::vector(standard_normal_vector(rng, 6))), 1e-5);
}

TEST(Diff, GradcheckReparametrizedNetworkLoss) {
  Rng rng(3);
  const auto arch = ModelArchitecture::mlp1(3, 4, 3);
  const std::size_t D = arch.parameter_count();
  Dataset batch{3, {}, {}};
  for (int i = 0; i < 8; ++i) batch.push_back(standard_normal_vector(rng, 3), i % 3);
  const auto eps = standard_normal_vector(rng, D);
  const LossSpec loss{LossKind::cross_entropy_clipped, 4.0};
  const ScalarObjective f = [&](Tape&, Var p) {
    return mc_empirical_risk(slice(p, 0, {D}), slice(p, D, {D}), arch, batch, loss, {eps});
  };
  std::vector<double> point = standard_normal_vector(rng, D);
  for (std::size_t i = 0; i < D; ++i) point.push_back(-2.0 + 0.3 * standard_normal(rng));
  EXPECT_LE(gradcheck(f, Tensor::vector(point)), 1e-4);
}
