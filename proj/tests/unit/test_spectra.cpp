// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include <gtest/gtest.h>

#include "numprobe/error.hpp"
#include "numprobe/probes.hpp"
#include "numprobe/spectra.hpp"
#include "numprobe/synthgen.hpp"
#include "test_support.hpp"

namespace numprobe {
namespace {

EmbeddingMatrix with_range_labels(Matrix values) {
  std::vector<Label> labels(static_cast<std::size_t>(values.rows()));
  std::iota(labels.begin(), labels.end(), 0);
  return {std::move(values), std::move(labels)};
}

// Direct O(N^2) evaluation of |sum_t x_t exp(-2 pi i k t / N)|.
std::vector<double> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n));
    }
    out[k] = std::abs(acc);
  }
  return out;
}

std::vector<double> random_series(std::size_t n, std::uint64_t seed) {
  const Matrix m = test::random_matrix(static_cast<Eigen::Index>(n), 1, seed);
  return {m.data(), m.data() + n};
}

TEST(Pca, RankOneDataHasOneComponent) {
  Matrix v(50, 6);
  const Vector dir = test::random_matrix(6, 1, 1);
  for (int i = 0; i < 50; ++i) v.row(i) = (0.3 * i - 2.0) * dir.transpose();
  const PCAResult p = pca(with_range_labels(v), 3);
  EXPECT_GE(p.explained_variance_ratio()[0], 0.999999);
  EXPECT_LT(p.explained_variance[1], 1e-20 + 1e-12 * p.explained_variance[0]);
  EXPECT_NEAR(std::abs(p.components.row(0).dot(dir.normalized())), 1.0, 1e-12);
}

TEST(Pca, IsotropicNoiseSpreadsVarianceEvenly) {
  const PCAResult p = pca(with_range_labels(test::random_matrix(5000, 16, 2)), 16);
  for (double r : p.explained_variance_ratio()) {
    EXPECT_GT(r, 0.03);
    EXPECT_LT(r, 0.10);
  }
  EXPECT_NEAR(p.total_variance, 16.0, 0.5);
}

TEST(Pca, ComponentsAreOrthonormalAndSortedAndReconstructionImproves) {
  const EmbeddingMatrix m = with_range_labels(test::random_matrix(80, 10, 3) * test::random_matrix(10, 10, 4));
  const PCAResult full = pca(m, 10);
  EXPECT_LT((full.components * full.components.transpose() - Matrix::Identity(10, 10)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(std::is_sorted(full.explained_variance.rbegin(), full.explained_variance.rend()));

  const Matrix centered = m.values().rowwise() - full.mean.transpose();
  double previous = INFINITY;
  for (int c = 1; c <= 10; ++c) {
    const PCAResult p = pca(m, c);
    const double err = (centered - p.projected * p.components).squaredNorm();
    EXPECT_LE(err, previous + 1e-9);
    previous = err;
  }
  EXPECT_LT(previous, 1e-18 * centered.squaredNorm() + 1e-18);
}

TEST(Pca, Preconditions) {
  const EmbeddingMatrix m = with_range_labels(test::random_matrix(5, 3, 1));
  EXPECT_THROW(pca(m, 0), PreconditionError);
  EXPECT_THROW(pca(m, 4), PreconditionError);
}

TEST(Dft, MatchesTheNaiveSum) {
  for (std::size_t n : {4u, 7u, 64u, 101u}) {
    const auto x = random_series(n, n);
    const auto fast = dft_magnitudes(x);
    const auto slow = naive_dft(x);
    ASSERT_EQ(fast.size(), slow.size());
    for (std::size_t k = 0; k < fast.size(); ++k) EXPECT_NEAR(fast[k], slow[k], 1e-10) << n << " " << k;
  }
  EXPECT_TRUE(dft_magnitudes({}).empty());
}

TEST(Dft, ParsevalHoldsForOddAndEvenLengths) {
  for (std::size_t n : {9u, 10u, 1000u}) {
    const auto x = random_series(n, 5);
    const double energy = std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
    EXPECT_NEAR(spectral_energy(dft_magnitudes(x), n), energy, 1e-9 * energy) << n;
  }
  EXPECT_EQ(bin_weight(0, 10), 1.0);
  EXPECT_EQ(bin_weight(5, 10), 1.0);
  EXPECT_EQ(bin_weight(4, 9), 2.0);
}

TEST(Dft, PureToneConcentratesInItsBin) {
  std::vector<double> x(1000);
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = std::cos(2 * std::numbers::pi * 100.0 * t / 1000.0 + 0.4);
  EXPECT_GE(dominant_bin_share(x), 0.99);
  const auto mags = dft_magnitudes(x);
  EXPECT_EQ(std::max_element(mags.begin(), mags.end()) - mags.begin(), 100);
  EXPECT_EQ(dominant_bin_share(std::vector<double>(20, 3.0)), 0.0);
}

TEST(Sparsity, ToneVersusWhiteNoise) {
  std::vector<double> mags(501, 0.0);
  mags[7] = 10.0;
  EXPECT_DOUBLE_EQ(top_bin_energy_share(mags), 1.0);
  EXPECT_DOUBLE_EQ(top_bin_energy_share(std::vector<double>(100, 1.0)), 0.05);
  EXPECT_DOUBLE_EQ(top_bin_energy_share({}), 0.0);

  const PCAResult p = pca(with_range_labels(test::random_matrix(1000, 64, 6)), 64);
  const SpectrumReport s = fourier_spectrum(p);
  EXPECT_EQ(s.max_magnitude.size(), 501u);
  EXPECT_EQ(s.component_count, 64);
  // The per-bin maximum over 64 components lifts the noise floor, so white
  // noise lands a little above the 0.05 of a flat spectrum.
  EXPECT_GT(s.sparsity, 0.05);
  EXPECT_LT(s.sparsity, 0.15);
}

TEST(Spectrum, HelixIsSparse) {
  SynthSpec spec;
  spec.n = 1000;
  spec.d = 64;
  spec.noise_sigma = 0.01;
  const PCAResult p = pca(generate(spec), 64);
  EXPECT_GT(fourier_spectrum(p).sparsity, 0.9);
}

TEST(Spectrum, NeedsContiguousLabels) {
  EmbeddingMatrix m(test::random_matrix(6, 3, 1), {0, 1, 2, 4, 5, 6});
  EXPECT_THROW(fourier_spectrum(pca(m, 2)), PreconditionError);
  EmbeddingMatrix shifted(test::random_matrix(6, 3, 1), {10, 11, 12, 13, 14, 15});
  EXPECT_NO_THROW(fourier_spectrum(pca(shifted, 2)));
  EmbeddingMatrix tiny(test::random_matrix(3, 3, 1), {0, 1, 2});
  EXPECT_THROW(fourier_spectrum(pca(tiny, 2)), PreconditionError);
}

TEST(SpectrumIo, CsvSchemas) {
  test::TempDir dir;
  const PCAResult p = pca(with_range_labels(test::random_matrix(10, 4, 1)), 2);
  write_pca_csv(p, dir.path() / "pca.csv");
  const std::string pca_csv = test::read_file(dir.path() / "pca.csv");
  EXPECT_EQ(pca_csv.substr(0, pca_csv.find('\n')), "label,pc_0,pc_1");
  EXPECT_EQ(std::count(pca_csv.begin(), pca_csv.end(), '\n'), 11);

  write_spectrum_csv(fourier_spectrum(p), dir.path() / "s.csv");
  const std::string s = test::read_file(dir.path() / "s.csv");
  EXPECT_EQ(s.substr(0, s.find('\n')), "bin_index,frequency_cycles_per_token,max_magnitude");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 7);
  EXPECT_NE(s.find("\n5,0.5,"), std::string::npos);
}

TEST(Waves, ZeroInputMapGivesZeroWaves) {
  test::TempDir dir;
  auto basis = std::make_shared<const BasisMatrix>(fourier_basis(8, 4));
  const ClassifierProbe p(Matrix::Zero(2, 3), Matrix::Ones(2, 4), basis);
  const EmbeddingMatrix m = with_range_labels(test::random_matrix(8, 3, 1));
  const Matrix h = hidden_codes(p, m);
  EXPECT_EQ(h.cwiseAbs().maxCoeff(), 0.0);
  dump_hidden_waves(p, m, dir.path() / "w.csv");
  const std::string csv = test::read_file(dir.path() / "w.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "label,unit_0,unit_1");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 9);
}

TEST(Waves, HelixProbeHasAPeriodicUnit) {
  SynthSpec spec;
  spec.n = 200;
  spec.d = 24;
  spec.seed = 3;
  spec.helix_periods = {2.0, 5.0, 10.0, 100.0};
  const EmbeddingMatrix m = generate(spec);
  TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.max_epochs = 300;
  const ClassifierProbe p = train_classifier(m, std::make_shared<const BasisMatrix>(fourier_basis(200)), cfg);
  const Matrix h = hidden_codes(p, m);
  double best = 0.0;
  for (Eigen::Index u = 0; u < h.cols(); ++u) {
    const Vector col = h.col(u);
    best = std::max(best, dominant_bin_share(std::span<const double>(col.data(), static_cast<std::size_t>(col.size()))));
  }
  EXPECT_GE(best, 0.5);
}

}  // namespace
}  // namespace numprobe
