// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#include "numprobe/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/QR>

#include "numprobe/error.hpp"

namespace numprobe {

LinearFit least_squares(const Matrix& X, const Vector& y) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (y.size() != n) throw PreconditionError("least_squares: X and y row counts differ");
  if (n < p + 1) {
    throw PreconditionError("least_squares: need n >= p + 1, got n=" + std::to_string(n) +
                            ", p=" + std::to_string(p));
  }
  if (!X.allFinite() || !y.allFinite()) throw DataError("least_squares: non-finite input");

  // Centering removes the intercept; the minimum-norm solution of the centred
  // system is the minimum-norm coefficient vector of the original problem.
  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
  const Vector yc = y.array() - y_mean;

  LinearFit fit;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Xc);
  fit.coeffs = cod.solve(yc);
  fit.intercept = y_mean - x_mean.dot(fit.coeffs);
  return fit;
}

AdamState::AdamState(std::size_t size, const AdamConfig& cfg)
    : config(cfg), first_moment(size, 0.0), second_moment(size, 0.0) {
  if (!(cfg.lr > 0.0)) throw PreconditionError("Adam learning rate must be positive");
  if (!(cfg.beta1 > 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 > 0.0 && cfg.beta2 < 1.0)) {
    throw PreconditionError("Adam betas must lie in (0, 1)");
  }
  if (!(cfg.eps > 0.0)) throw PreconditionError("Adam eps must be positive");
  if (cfg.weight_decay < 0.0) throw PreconditionError("weight decay must be non-negative");
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw PreconditionError("adam_step: parameter, gradient and moment sizes differ");
  }
  const AdamConfig& c = state.config;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  const double shrink = c.decoupled_weight_decay ? 1.0 - c.lr * c.weight_decay : 1.0;
  const double coupled = c.decoupled_weight_decay ? 0.0 : c.weight_decay;

  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] + coupled * params[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    params[i] = params[i] * shrink - c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

LossAndGrad restricted_cross_entropy(std::span<const double> logits, std::int64_t target,
                                     std::span<const std::int64_t> allowed) {
  const auto n = static_cast<std::int64_t>(logits.size());
  bool target_allowed = false;
  for (auto a : allowed) {
    if (a < 0 || a >= n) {
      throw PreconditionError("allowed index " + std::to_string(a) + " outside [0, " +
                              std::to_string(n) + ")");
    }
    target_allowed |= a == target;
  }
  if (!target_allowed) {
    throw PreconditionError("target " + std::to_string(target) + " is not in the allowed set");
  }

  double max_logit = -std::numeric_limits<double>::infinity();
  for (auto a : allowed) max_logit = std::max(max_logit, logits[static_cast<std::size_t>(a)]);
  double sum = 0.0;
  for (auto a : allowed) sum += std::exp(logits[static_cast<std::size_t>(a)] - max_logit);
  const double log_z = max_logit + std::log(sum);

  LossAndGrad out;
  out.loss = log_z - logits[static_cast<std::size_t>(target)];
  out.grad.assign(logits.size(), 0.0);
  for (auto a : allowed) {
    const auto i = static_cast<std::size_t>(a);
    out.grad[i] = std::exp(logits[i] - log_z);
  }
  out.grad[static_cast<std::size_t>(target)] -= 1.0;
  return out;
}

double mean_cross_entropy(const Matrix& logits, std::span<const Eigen::Index> targets, Matrix& grad) {
  const Eigen::Index n = logits.rows();
  if (static_cast<Eigen::Index>(targets.size()) != n) {
    throw PreconditionError("mean_cross_entropy: one target per row required");
  }
  grad.resize(n, logits.cols());
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = logits.row(i);
    const double max_logit = row.maxCoeff();
    auto g = grad.row(i);
    g = (row.array() - max_logit).exp();
    const double sum = g.sum();
    const double log_z = max_logit + std::log(sum);
    total += log_z - row(targets[static_cast<std::size_t>(i)]);
    g *= inv_n / sum;
    g(targets[static_cast<std::size_t>(i)]) -= inv_n;
  }
  return total * inv_n;
}

std::string_view to_string(Regularization r) {
  switch (r) {
    case Regularization::l1: return "l1";
    case Regularization::l2: return "l2";
    default: return "none";
  }
}

Regularization parse_regularization(std::string_view text) {
  if (text == "none") return Regularization::none;
  if (text == "l1") return Regularization::l1;
  if (text == "l2") return Regularization::l2;
  throw PreconditionError("unknown regularization '" + std::string(text) + "'");
}

double add_penalty(Regularization kind, double lambda, std::span<const double> params,
                   std::span<double> grad) {
  if (kind == Regularization::none || lambda == 0.0) return 0.0;
  double value = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double p = params[i];
    if (kind == Regularization::l1) {
      value += std::abs(p);
      grad[i] += lambda * static_cast<double>((p > 0.0) - (p < 0.0));
    } else {
      value += p * p;
      grad[i] += 2.0 * lambda * p;
    }
  }
  return lambda * value;
}

double check_gradient(const Objective& f, std::span<const double> point, double h) {
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> analytic(x.size(), 0.0);
  std::vector<double> scratch(x.size(), 0.0);
  const double f0 = f(x, analytic);
  if (!std::isfinite(f0)) throw DataError("check_gradient: objective is not finite at the point");

  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    std::fill(scratch.begin(), scratch.end(), 0.0);
    const double fp = f(x, scratch);
    x[i] = saved - h;
    const double fm = f(x, scratch);
    x[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw DataError("check_gradient: objective is not finite near coordinate " + std::to_string(i));
    }
    const double numeric = (fp - fm) / (2.0 * h);
    const double scale = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  return worst;
}

}  // namespace numprobe
