// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace numprobe {

/// Row-major dense matrix used for all N x d data; rows are samples.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Integer value a number token spells.
using Label = std::int64_t;

inline constexpr Label kMaxLabelExclusive = 1'000'000'000;

}  // namespace numprobe
