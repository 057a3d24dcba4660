// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#include "numprobe/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "numprobe/error.hpp"

namespace numprobe {

namespace {

constexpr double kBase10Periods[] = {10.0, 100.0, 1000.0};

bool near(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(a, b); }

/// Lexicographic sort of row indices; equal neighbours mean duplicate rows.
/// No two rows closer than 1e-6 in Euclidean distance. Rows are sorted by
/// their projection on a fixed unit vector; only rows whose projections lie
/// within the tolerance of each other can be that close.
bool rows_distinct(const Matrix& m) {
  constexpr double tol = 1e-6;
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  Vector dir(m.cols());
  for (auto& v : dir) v = normal(rng);
  dir.normalize();
  const Vector proj = m * dir;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(m.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return proj(a) < proj(b); });
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = i + 1; j < order.size() && proj(order[j]) - proj(order[i]) <= tol; ++j) {
      if ((m.row(order[i]) - m.row(order[j])).squaredNorm() <= tol * tol) return false;
    }
  }
  return true;
}

}  // namespace

std::string_view to_string(BasisKind kind) {
  return kind == BasisKind::fourier ? "fourier" : "binary";
}

FrequencySpec FrequencySpec::parse(std::string_view text) {
  if (text.empty() || text == "default") return default_spec();
  FrequencySpec spec;
  std::stringstream ss{std::string(text)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double p = std::stod(item, &used);
      if (used != item.size() && item.find_first_not_of(' ', used) != std::string::npos) {
        throw std::invalid_argument(item);
      }
      spec.periods.push_back(p);
    } catch (const std::exception&) {
      throw PreconditionError("cannot parse period '" + item + "' in frequency spec");
    }
  }
  if (spec.periods.empty()) throw PreconditionError("empty frequency spec");
  return spec;
}

std::string FrequencySpec::to_string() const {
  if (is_default()) return "default";
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < periods.size(); ++i) {
    if (i) os << ',';
    os << periods[i];
  }
  return os.str();
}

std::vector<double> default_periods(int n_classes, int n_features) {
  if (n_classes < 2) throw PreconditionError("n_classes must be at least 2");
  if (n_features < 2 || n_features % 2 != 0) {
    throw PreconditionError("n_features must be a positive even number, got " +
                            std::to_string(n_features));
  }
  const int wanted = n_features / 2;
  const double lo = 2.0;
  const double hi = 2.0 * n_classes;

  // Grow the ladder until the merged set has exactly `wanted` distinct periods;
  // a base-10 period that coincides with a rung is not counted twice.
  for (int rungs = std::max(1, wanted - 3); rungs <= wanted; ++rungs) {
    std::vector<double> periods;
    for (int r = 0; r < rungs; ++r) {
      const double t = rungs == 1 ? 0.0 : static_cast<double>(r) / (rungs - 1);
      periods.push_back(lo * std::pow(hi / lo, t));
    }
    for (double extra : kBase10Periods) {
      if (static_cast<int>(periods.size()) >= wanted) break;
      if (std::none_of(periods.begin(), periods.end(), [&](double p) { return near(p, extra); })) {
        periods.push_back(extra);
      }
    }
    if (static_cast<int>(periods.size()) == wanted) {
      std::sort(periods.begin(), periods.end());
      return periods;
    }
  }
  throw PreconditionError("cannot build a default frequency ladder");  // unreachable
}

BasisMatrix binary_basis(int n_classes) {
  if (n_classes < 2) {
    throw PreconditionError("binary basis needs n_classes >= 2, got " + std::to_string(n_classes));
  }
  int k = 0;
  while ((std::int64_t{1} << k) < n_classes) ++k;
  k = std::max(k, 1);

  BasisMatrix b;
  b.kind_ = BasisKind::binary;
  b.values_ = Matrix::Zero(n_classes, k);
  for (int i = 0; i < n_classes; ++i) {
    for (int bit = 0; bit < k; ++bit) {
      b.values_(i, k - 1 - bit) = static_cast<double>((i >> bit) & 1);
    }
  }
  return b;
}

BasisMatrix fourier_basis(int n_classes, int n_features, const FrequencySpec& spec) {
  if (n_classes < 2) throw PreconditionError("fourier basis needs n_classes >= 2");
  if (n_features < 2 || n_features % 2 != 0) {
    throw PreconditionError("fourier basis needs an even positive n_features, got " +
                            std::to_string(n_features));
  }
  std::vector<double> periods =
      spec.is_default() ? default_periods(n_classes, n_features) : spec.periods;
  if (static_cast<int>(periods.size()) * 2 != n_features) {
    throw PreconditionError("frequency spec lists " + std::to_string(periods.size()) +
                            " periods but n_features / 2 = " + std::to_string(n_features / 2));
  }
  for (double p : periods) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw PreconditionError("periods must be positive and finite");
    }
  }
  {
    std::vector<double> sorted = periods;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw PreconditionError("frequency spec contains duplicate frequencies");
    }
  }

  BasisMatrix b;
  b.kind_ = BasisKind::fourier;
  b.spec_ = FrequencySpec::from_periods(periods);
  b.frequencies_.reserve(periods.size());
  for (double p : periods) b.frequencies_.push_back(2.0 * std::numbers::pi / p);

  b.values_.resize(n_classes, n_features);
  for (int i = 0; i < n_classes; ++i) {
    for (std::size_t m = 0; m < b.frequencies_.size(); ++m) {
      const double angle = static_cast<double>(i) * b.frequencies_[m];
      b.values_(i, static_cast<Eigen::Index>(2 * m)) = std::sin(angle);
      b.values_(i, static_cast<Eigen::Index>(2 * m + 1)) = std::cos(angle);
    }
  }
  if (!rows_distinct(b.values_)) {
    throw PreconditionError("frequency spec does not separate all " + std::to_string(n_classes) +
                            " integers (duplicate basis rows)");
  }
  return b;
}

}  // namespace numprobe
