// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "numprobe/embstore.hpp"
#include "numprobe/types.hpp"

namespace numprobe {

enum class SynthKind { linear, loglinear, helix, gaussian };

std::string_view to_string(SynthKind kind);
SynthKind parse_synth_kind(std::string_view text);

struct SynthSpec {
  SynthKind kind = SynthKind::helix;
  int n = 1000;
  int d = 64;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> helix_periods = {2.0, 5.0, 10.0, 100.0, 1000.0};
  /// Multiplies the noise-free signal (ignored for gaussian).
  double scale = 1.0;

  void validate() const;
};

/**
 * Seeded synthetic embeddings with labels 0..n-1.
 *
 *  - linear:    x_i = scale * i * v + noise, v a random unit vector
 *  - loglinear: x_i = scale * ln(1 + i) * v + noise
 *  - helix:     x_i = scale * Q [i/n, sin(2 pi i/P_1), cos(2 pi i/P_1), ..., 0...] + noise,
 *               Q a random orthogonal d x d matrix
 *  - gaussian:  i.i.d. standard normal entries
 */
EmbeddingMatrix generate(const SynthSpec& spec);

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
Matrix random_orthogonal(int d, std::uint64_t seed);

}  // namespace numprobe
