// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#include "numprobe/synthgen.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/QR>

#include "numprobe/error.hpp"

namespace numprobe {

std::string_view to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::linear: return "linear";
    case SynthKind::loglinear: return "loglinear";
    case SynthKind::helix: return "helix";
    default: return "gaussian";
  }
}

SynthKind parse_synth_kind(std::string_view text) {
  if (text == "linear") return SynthKind::linear;
  if (text == "loglinear") return SynthKind::loglinear;
  if (text == "helix") return SynthKind::helix;
  if (text == "gaussian") return SynthKind::gaussian;
  throw PreconditionError("unknown synthetic kind '" + std::string(text) + "'");
}

void SynthSpec::validate() const {
  if (n < 2) throw PreconditionError("synthetic n must be at least 2");
  if (n > kMaxLabelExclusive) throw PreconditionError("synthetic n too large");
  if (d < 1) throw PreconditionError("synthetic d must be at least 1");
  if (!(noise_sigma >= 0.0)) throw PreconditionError("noise_sigma must be non-negative");
  if (!(scale > 0.0)) throw PreconditionError("scale must be positive");
  if (kind == SynthKind::helix) {
    if (helix_periods.empty()) throw PreconditionError("helix needs at least one period");
    for (double p : helix_periods) {
      if (!(p > 0.0)) throw PreconditionError("helix periods must be positive");
    }
    if (d < 2 * static_cast<int>(helix_periods.size()) + 1) {
      throw PreconditionError("helix with " + std::to_string(helix_periods.size()) +
                              " periods needs d >= " +
                              std::to_string(2 * helix_periods.size() + 1));
    }
  }
}

Matrix random_orthogonal(int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) g(i, j) = gauss(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

EmbeddingMatrix generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Matrix values = Matrix::Zero(spec.n, spec.d);
  std::vector<Label> labels(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) labels[static_cast<std::size_t>(i)] = i;

  switch (spec.kind) {
    case SynthKind::gaussian:
      for (int i = 0; i < spec.n; ++i) {
        for (int j = 0; j < spec.d; ++j) values(i, j) = gauss(rng);
      }
      return {std::move(values), std::move(labels), "synthetic-gaussian"};

    case SynthKind::linear:
    case SynthKind::loglinear: {
      Vector v(spec.d);
      for (int j = 0; j < spec.d; ++j) v(j) = gauss(rng);
      v.normalize();
      for (int i = 0; i < spec.n; ++i) {
        const double t = spec.kind == SynthKind::linear ? static_cast<double>(i)
                                                        : std::log1p(static_cast<double>(i));
        values.row(i) = (spec.scale * t) * v.transpose();
      }
      break;
    }

    case SynthKind::helix: {
      Matrix clean = Matrix::Zero(spec.n, spec.d);
      for (int i = 0; i < spec.n; ++i) {
        clean(i, 0) = static_cast<double>(i) / spec.n;
        for (std::size_t m = 0; m < spec.helix_periods.size(); ++m) {
          const double angle = 2.0 * std::numbers::pi * i / spec.helix_periods[m];
          clean(i, static_cast<Eigen::Index>(1 + 2 * m)) = std::sin(angle);
          clean(i, static_cast<Eigen::Index>(2 + 2 * m)) = std::cos(angle);
        }
      }
      const Matrix q = random_orthogonal(spec.d, rng());
      values.noalias() = spec.scale * clean * q.transpose();
      break;
    }
  }

  if (spec.noise_sigma > 0.0) {
    for (int i = 0; i < spec.n; ++i) {
      for (int j = 0; j < spec.d; ++j) values(i, j) += spec.noise_sigma * gauss(rng);
    }
  }
  return {std::move(values), std::move(labels), "synthetic-" + std::string(to_string(spec.kind))};
}

}  // namespace numprobe
