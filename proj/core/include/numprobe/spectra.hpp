// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "numprobe/embstore.hpp"
#include "numprobe/probes.hpp"
#include "numprobe/types.hpp"

namespace numprobe {

struct PCAResult {
  /// c x d, orthonormal rows; each row's largest-magnitude entry is positive.
  Matrix components;
  /// N x c, (values - mean) * components^T; rows follow `labels`.
  Matrix projected;
  /// Non-increasing, divided by N - 1.
  std::vector<double> explained_variance;
  Vector mean;
  /// Sum of the variance of every principal direction, kept or not.
  double total_variance = 0.0;
  std::vector<Label> labels;

  std::vector<double> explained_variance_ratio() const;
};

inline constexpr int kWavePcaDims = 16;
inline constexpr int kSpectrumPcaDims = 128;

PCAResult pca(const EmbeddingMatrix& m, int n_components);

/// |X_k| for k = 0..N/2 of the real DFT X_k = sum_t x_t exp(-2 pi i k t / N).
std::vector<double> dft_magnitudes(std::span<const double> series);

/// One-sided Parseval energy: (|X_0|^2 + 2 sum |X_k|^2 + [|X_{N/2}|^2]) / N,
/// equal to sum_t x_t^2.
double spectral_energy(std::span<const double> magnitudes, std::size_t n_samples);

/// Parseval weight of bin k in a one-sided spectrum of an N-sample series.
double bin_weight(std::size_t k, std::size_t n_samples);

/// Share of the largest non-DC bin in the spectral energy of the mean-removed series.
double dominant_bin_share(std::span<const double> series);

struct SpectrumReport {
  /// Per-bin maximum magnitude over components, bins 0..N/2.
  std::vector<double> max_magnitude;
  int component_count = 0;
  std::size_t n_samples = 0;
  /// Energy share of the top ceil(0.05 * bins) bins of `max_magnitude`.
  double sparsity = 0.0;
  std::string normalization = "unnormalized DFT magnitude";
};

/// Energy share (squared magnitude) of the largest ceil(fraction * bins) bins.
double top_bin_energy_share(std::span<const double> magnitudes, double fraction = 0.05);

/// DFT along the label axis of every principal component. Labels must be
/// contiguous integers (any start) and N >= 4.
SpectrumReport fourier_spectrum(const PCAResult& p);

/// CSV `bin_index,frequency_cycles_per_token,max_magnitude`.
void write_spectrum_csv(const SpectrumReport& s, const std::filesystem::path& path);

/// CSV `label,pc_0..pc_{c-1}`.
void write_pca_csv(const PCAResult& p, const std::filesystem::path& path);

/// CSV `label,unit_0..unit_{h-1}` of the probe's hidden codes, ordered by label.
void dump_hidden_waves(const ClassifierProbe& p, const EmbeddingMatrix& m,
                       const std::filesystem::path& path);

}  // namespace numprobe
