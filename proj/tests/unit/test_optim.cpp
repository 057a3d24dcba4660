// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Cholesky>
#include <gtest/gtest.h>

#include "numprobe/error.hpp"
#include "numprobe/optim.hpp"
#include "numprobe/probes.hpp"
#include "test_support.hpp"

namespace numprobe {
namespace {

TEST(LeastSquares, ExactLinearDataWithRedundantColumn) {
  Matrix x(10, 2);
  Vector y(10);
  for (int i = 0; i < 10; ++i) {
    x(i, 0) = i;
    x(i, 1) = 1.0;
    y(i) = i;
  }
  const LinearFit fit = least_squares(x, y);
  EXPECT_NEAR(fit.coeffs(0), 1.0, 1e-10);
  EXPECT_NEAR(fit.coeffs(1), 0.0, 1e-10);
  EXPECT_NEAR(fit.intercept, 0.0, 1e-10);
}

TEST(LeastSquares, ConstantTarget) {
  const Matrix x = test::random_matrix(20, 3, 4);
  const Vector y = Vector::Constant(20, 2.5);
  const LinearFit fit = least_squares(x, y);
  EXPECT_LT(fit.coeffs.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(fit.intercept, 2.5, 1e-12);
}

TEST(LeastSquares, ResidualIsOrthogonalToColumns) {
  const Matrix x = test::random_matrix(50, 5, 7);
  const Vector y = test::random_matrix(50, 1, 8);
  const LinearFit fit = least_squares(x, y);
  const Vector r = (x * fit.coeffs).array() + fit.intercept - y.array();
  EXPECT_LT((x.transpose() * r).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT(std::abs(r.sum()), 1e-8);
}

TEST(LeastSquares, MatchesNormalEquations) {
  const Matrix x = test::random_matrix(40, 4, 9);
  const Vector y = test::random_matrix(40, 1, 10);
  Matrix aug(40, 5);
  aug << x, Vector::Ones(40);
  const Vector beta = (aug.transpose() * aug).ldlt().solve(aug.transpose() * y);
  const LinearFit fit = least_squares(x, y);
  EXPECT_LT((fit.coeffs - beta.head(4)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(fit.intercept, beta(4), 1e-10);
}

TEST(LeastSquares, RankDeficientGivesMinimumNorm) {
  Matrix x(6, 2);
  Vector y(6);
  for (int i = 0; i < 6; ++i) {
    x(i, 0) = i;
    x(i, 1) = i;
    y(i) = 2.0 * i;
  }
  const LinearFit fit = least_squares(x, y);
  EXPECT_NEAR(fit.coeffs(0), 1.0, 1e-10);
  EXPECT_NEAR(fit.coeffs(1), 1.0, 1e-10);
}

TEST(LeastSquares, Preconditions) {
  EXPECT_THROW(least_squares(Matrix::Zero(3, 3), Vector::Zero(3)), PreconditionError);
  EXPECT_THROW(least_squares(Matrix::Zero(4, 2), Vector::Zero(3)), PreconditionError);
  Matrix x = Matrix::Ones(5, 2);
  x(1, 1) = NAN;
  EXPECT_THROW(least_squares(x, Vector::Zero(5)), DataError);
  EXPECT_THROW(least_squares(Matrix::Ones(5, 2), Vector::Constant(5, NAN)), DataError);
}

AdamConfig cfg(double lr, double wd = 0.0, bool decoupled = true) {
  AdamConfig c;
  c.lr = lr;
  c.weight_decay = wd;
  c.decoupled_weight_decay = decoupled;
  return c;
}

TEST(Adam, FirstStepMovesByLr) {
  AdamState s(1, cfg(0.1));
  double theta = 0.0;
  const double g = 1.0;
  adam_step({&theta, 1}, {&g, 1}, s);
  EXPECT_LT(std::abs(theta + 0.1), 1e-6);
  EXPECT_EQ(s.step_count, 1);
}

TEST(Adam, ZeroGradientIsAFixedPoint) {
  AdamState s(3, cfg(0.1));
  std::vector<double> p{1.0, -2.0, 3.0};
  const std::vector<double> g(3, 0.0);
  for (int i = 0; i < 5; ++i) adam_step(p, g, s);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
  EXPECT_EQ(s.step_count, 5);
}

TEST(Adam, QuadraticTrajectoryMatchesScalarTranscription) {
  AdamState s(1, cfg(0.01));
  double theta = 1.0;
  double m = 0, v = 0, ref = 1.0;
  for (int t = 1; t <= 10; ++t) {
    const double g = 2.0 * theta;
    adam_step({&theta, 1}, {&g, 1}, s);

    const double gr = 2.0 * ref;
    m = 0.9 * m + 0.1 * gr;
    v = 0.999 * v + 0.001 * gr * gr;
    ref -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    ASSERT_NEAR(theta, ref, 1e-12) << "step " << t;
  }
}

TEST(Adam, DecoupledDecayShrinksBeforeTheUpdate) {
  AdamState s(1, cfg(0.1, 0.5));
  double theta = 2.0;
  const double g = 0.0;
  adam_step({&theta, 1}, {&g, 1}, s);
  EXPECT_DOUBLE_EQ(theta, 2.0 * (1 - 0.1 * 0.5));
}

TEST(Adam, CoupledDecayEntersTheGradient) {
  AdamState s(1, cfg(0.1, 0.5, false));
  double theta = 2.0;
  const double g = 0.0;
  adam_step({&theta, 1}, {&g, 1}, s);
  // Effective gradient wd*theta = 1 > 0, so the first step is -lr.
  EXPECT_NEAR(theta, 1.9, 1e-6);
  EXPECT_DOUBLE_EQ(s.first_moment[0], 0.1);
}

TEST(Adam, ShapeAndConfigErrors) {
  AdamState s(2, cfg(0.1));
  std::vector<double> p(3, 0.0), g(3, 0.0);
  EXPECT_THROW(adam_step(p, g, s), PreconditionError);
  std::vector<double> p2(2, 0.0), g1(1, 0.0);
  EXPECT_THROW(adam_step(p2, g1, s), PreconditionError);
  EXPECT_THROW(AdamState(1, cfg(0.0)), PreconditionError);
  AdamConfig bad = cfg(0.1);
  bad.beta1 = 1.0;
  EXPECT_THROW(AdamState(1, bad), PreconditionError);
  EXPECT_THROW(AdamState(1, cfg(0.1, -1.0)), PreconditionError);
}

TEST(RestrictedCrossEntropy, UniformLogits) {
  const std::vector<double> logits(6, 0.7);
  const std::vector<std::int64_t> allowed{0, 2, 3, 5};
  const LossAndGrad r = restricted_cross_entropy(logits, 3, allowed);
  EXPECT_NEAR(r.loss, std::log(4.0), 1e-12);
}

TEST(RestrictedCrossEntropy, SingletonAllowedSet) {
  const std::vector<double> logits{3.0, -1.0, 8.0};
  const std::vector<std::int64_t> allowed{1};
  const LossAndGrad r = restricted_cross_entropy(logits, 1, allowed);
  EXPECT_EQ(r.loss, 0.0);
  for (double g : r.grad) EXPECT_EQ(g, 0.0);
}

TEST(RestrictedCrossEntropy, TwoClassExample) {
  const std::vector<double> logits{1.0, 2.0, 3.0};
  const std::vector<std::int64_t> allowed{0, 2};
  const LossAndGrad r = restricted_cross_entropy(logits, 2, allowed);
  EXPECT_NEAR(r.loss, std::log(1.0 + std::exp(-2.0)), 1e-14);
  EXPECT_EQ(r.grad[1], 0.0);
  const double p0 = 1.0 / (1.0 + std::exp(2.0));
  EXPECT_NEAR(r.grad[0], p0, 1e-14);
  EXPECT_NEAR(r.grad[2], (1.0 - p0) - 1.0, 1e-14);
}

TEST(RestrictedCrossEntropy, ShiftInvariantAndStable) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 3.0);
  std::vector<double> logits(9);
  for (auto& l : logits) l = normal(rng);
  const std::vector<std::int64_t> allowed{0, 1, 4, 6, 8};
  const double base = restricted_cross_entropy(logits, 4, allowed).loss;
  for (double shift : {-50.0, 1e3, 1e5}) {
    std::vector<double> shifted = logits;
    for (auto& l : shifted) l += shift;
    EXPECT_NEAR(restricted_cross_entropy(shifted, 4, allowed).loss, base, 1e-10 * std::max(1.0, shift / 1e3));
  }
  std::vector<double> big{1000.0, -1000.0, 999.0};
  const LossAndGrad r = restricted_cross_entropy(big, 2, std::vector<std::int64_t>{0, 1, 2});
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_NEAR(r.loss, std::log1p(std::exp(1.0)), 1e-12);
}

TEST(RestrictedCrossEntropy, Preconditions) {
  const std::vector<double> logits{0.0, 1.0};
  EXPECT_THROW(restricted_cross_entropy(logits, 1, std::vector<std::int64_t>{0}), PreconditionError);
  EXPECT_THROW(restricted_cross_entropy(logits, 0, std::vector<std::int64_t>{0, 2}), PreconditionError);
}

TEST(Penalty, L1AndL2ValuesAndGradients) {
  std::vector<double> p{1.5, -2.0, 0.0};
  std::vector<double> g(3, 0.0);
  EXPECT_DOUBLE_EQ(add_penalty(Regularization::l1, 0.1, p, g), 0.1 * 3.5);
  EXPECT_EQ(g, (std::vector<double>{0.1, -0.1, 0.0}));
  std::fill(g.begin(), g.end(), 0.0);
  EXPECT_DOUBLE_EQ(add_penalty(Regularization::l2, 0.1, p, g), 0.1 * 6.25);
  EXPECT_DOUBLE_EQ(g[0], 0.3);
  EXPECT_DOUBLE_EQ(g[1], -0.4);
  std::fill(g.begin(), g.end(), 0.0);
  EXPECT_EQ(add_penalty(Regularization::none, 0.0, p, g), 0.0);
  EXPECT_EQ(parse_regularization("l1"), Regularization::l1);
  EXPECT_EQ(to_string(Regularization::l2), "l2");
  EXPECT_THROW(parse_regularization("l3"), PreconditionError);
}

TEST(CheckGradient, Quadratic) {
  const Objective f = [](std::span<const double> x, std::span<double> g) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      s += x[i] * x[i];
      g[i] = 2 * x[i];
    }
    return s;
  };
  const Matrix p = test::random_matrix(7, 1, 12);
  EXPECT_LT(check_gradient(f, {p.data(), 7}), 1e-9);
}

TEST(CheckGradient, DetectsAWrongGradient) {
  const Objective f = [](std::span<const double> x, std::span<double> g) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      s += x[i] * x[i];
      g[i] = 4 * x[i];
    }
    return s;
  };
  const std::vector<double> p{0.8, -1.2, 2.0};
  EXPECT_GT(check_gradient(f, p), 0.3);
}

TEST(CheckGradient, NonFiniteObjective) {
  const Objective f = [](std::span<const double> x, std::span<double> g) {
    g[0] = 0;
    return std::log(x[0]);
  };
  const std::vector<double> p{-1.0};
  EXPECT_THROW(check_gradient(f, p), DataError);
}

TEST(CheckGradient, ClassifierLossAtRandomInit) {
  // 20 embeddings of dimension 8 against a 10-feature basis.
  const int n = 20, d = 8, h = 6, k = 10;
  const Matrix x = test::random_matrix(n, d, 21);
  const Matrix basis = test::random_matrix(15, k, 22);
  std::vector<Eigen::Index> targets(n);
  for (int i = 0; i < n; ++i) targets[static_cast<std::size_t>(i)] = i % 15;
  const Matrix w_in0 = test::random_matrix(h, d, 23, 1.0 / std::sqrt(d));
  const Matrix w_out0 = test::random_matrix(h, k, 24, 1.0 / std::sqrt(k));

  for (Regularization reg : {Regularization::none, Regularization::l2}) {
    const Objective f = [&](std::span<const double> p, std::span<double> g) {
      const Matrix w_in = Eigen::Map<const Matrix>(p.data(), h, d);
      const Matrix w_out = Eigen::Map<const Matrix>(p.data() + h * d, h, k);
      const ClassifierLoss l = classifier_loss(w_in, w_out, x, basis, targets, reg, 0.05);
      std::copy(l.grad_w_in.data(), l.grad_w_in.data() + h * d, g.begin());
      std::copy(l.grad_w_out.data(), l.grad_w_out.data() + h * k, g.begin() + h * d);
      return l.loss;
    };
    std::vector<double> point(w_in0.data(), w_in0.data() + h * d);
    point.insert(point.end(), w_out0.data(), w_out0.data() + h * k);
    EXPECT_LT(check_gradient(f, point), 1e-4);
  }
}

}  // namespace
}  // namespace numprobe
