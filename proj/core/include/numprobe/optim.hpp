// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "numprobe/types.hpp"

namespace numprobe {

// ---------------------------------------------------------------------------
// Least squares
// ---------------------------------------------------------------------------

struct LinearFit {
  Vector coeffs;
  double intercept = 0.0;
};

/// Minimizes sum_i (coeffs . X_i + intercept - y_i)^2. Rank-deficient designs
/// get the minimum-norm coefficient vector. Requires n >= p + 1.
LinearFit least_squares(const Matrix& X, const Vector& y);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  /// Decoupled decay shrinks parameters by (1 - lr * wd) before the adaptive
  /// step; otherwise wd * theta is added to the gradient.
  bool decoupled_weight_decay = true;
};

struct AdamState {
  AdamConfig config;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step_count = 0;

  AdamState() = default;
  AdamState(std::size_t size, const AdamConfig& cfg);
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Cross-entropy of `target` with the softmax taken over `allowed` only.
/// Gradient entries outside `allowed` are exactly zero.
LossAndGrad restricted_cross_entropy(std::span<const double> logits, std::int64_t target,
                                     std::span<const std::int64_t> allowed);

/// Row-wise softmax cross-entropy averaged over rows; targets index columns.
/// `grad` receives dLoss/dLogits (already divided by the row count).
double mean_cross_entropy(const Matrix& logits, std::span<const Eigen::Index> targets, Matrix& grad);

enum class Regularization { none, l1, l2 };

std::string_view to_string(Regularization r);
Regularization parse_regularization(std::string_view text);

/// Adds the penalty lambda * ||p||_1 or lambda * ||p||_2^2 and its (sub)gradient.
double add_penalty(Regularization kind, double lambda, std::span<const double> params,
                   std::span<double> grad);

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

/// Returns f(point) and writes the analytic gradient into `grad`.
using Objective = std::function<double(std::span<const double> point, std::span<double> grad)>;

/// Max over coordinates of |g_a - g_n| / max(1, |g_a|, |g_n|), with g_n from
/// central differences of step `h`.
double check_gradient(const Objective& f, std::span<const double> point, double h = 1e-5);

}  // namespace numprobe
