// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "numprobe/types.hpp"

namespace numprobe {

enum class BasisKind { fourier, binary };

std::string_view to_string(BasisKind kind);

/**
 * Frequencies of a Fourier basis, expressed as periods in integer units.
 *
 * An empty `periods` list selects the default ladder: periods log-spaced from
 * 2 to 2 * n_classes, merged with the base-10 periods 10, 100 and 1000, for a
 * total of n_features / 2 distinct frequencies.
 */
struct FrequencySpec {
  std::vector<double> periods;

  bool is_default() const noexcept { return periods.empty(); }
  static FrequencySpec default_spec() { return {}; }
  static FrequencySpec from_periods(std::vector<double> periods) { return {std::move(periods)}; }

  /// Accepts "default" or a comma-separated list of periods.
  static FrequencySpec parse(std::string_view text);
  std::string to_string() const;
};

/// Periods used by the default spec for a given size (ascending).
std::vector<double> default_periods(int n_classes, int n_features);

/// Fixed a-priori integer encoding; row i encodes integer i.
class BasisMatrix {
 public:
  const Matrix& values() const noexcept { return values_; }
  BasisKind kind() const noexcept { return kind_; }
  /// Angular frequencies in radians per integer step (fourier only).
  const std::vector<double>& frequencies() const noexcept { return frequencies_; }
  int n_classes() const noexcept { return static_cast<int>(values_.rows()); }
  int n_features() const noexcept { return static_cast<int>(values_.cols()); }
  /// The spec this basis was built from (fourier only; periods are explicit).
  const FrequencySpec& frequency_spec() const noexcept { return spec_; }

  friend BasisMatrix binary_basis(int n_classes);
  friend BasisMatrix fourier_basis(int n_classes, int n_features, const FrequencySpec& spec);

 private:
  BasisMatrix() = default;

  Matrix values_;
  BasisKind kind_ = BasisKind::binary;
  std::vector<double> frequencies_;
  FrequencySpec spec_;
};

inline constexpr int kDefaultFourierFeatures = 128;

/// Row i is i in base 2, most significant bit first; k = ceil(log2 n_classes).
BasisMatrix binary_basis(int n_classes);

/// values[i, 2m] = sin(i w_m), values[i, 2m + 1] = cos(i w_m).
BasisMatrix fourier_basis(int n_classes, int n_features = kDefaultFourierFeatures,
                          const FrequencySpec& spec = FrequencySpec::default_spec());

}  // namespace numprobe
