// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#include <numeric>
#include <random>

#include <benchmark/benchmark.h>

#include "numprobe/basis.hpp"
#include "numprobe/optim.hpp"
#include "numprobe/probes.hpp"
#include "numprobe/spectra.hpp"
#include "numprobe/synthgen.hpp"

namespace {

using namespace numprobe;

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

EmbeddingMatrix helix(int n, int d) {
  SynthSpec s;
  s.n = n;
  s.d = d;
  s.noise_sigma = 0.01;
  return generate(s);
}

// One full-batch forward and backward pass: N x d inputs, h hidden, k features.
void BM_ClassifierLoss(benchmark::State& state) {
  const auto n = state.range(0);
  const Eigen::Index d = 64, h = 100, k = 128;
  const Matrix x = gaussian(n, d, 1);
  const Matrix w_in = gaussian(h, d, 2) * 0.1;
  const Matrix w_out = gaussian(h, k, 3) * 0.1;
  const Matrix basis = fourier_basis(static_cast<int>(n), static_cast<int>(k)).values();
  std::vector<Eigen::Index> targets(static_cast<std::size_t>(n));
  std::iota(targets.begin(), targets.end(), 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(classifier_loss(w_in, w_out, x, basis, targets));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_ClassifierLoss)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_TrainClassifier(benchmark::State& state) {
  const EmbeddingMatrix m = helix(1000, 64);
  auto basis = std::make_shared<const BasisMatrix>(fourier_basis(1000));
  TrainConfig cfg;
  cfg.max_epochs = static_cast<int>(state.range(0));
  cfg.patience = cfg.max_epochs - 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_classifier(m, basis, cfg));
  }
}
BENCHMARK(BM_TrainClassifier)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_LeastSquares(benchmark::State& state) {
  const Matrix x = gaussian(state.range(0), 64, 4);
  const Vector y = gaussian(state.range(0), 1, 5);
  for (auto _ : state) benchmark::DoNotOptimize(least_squares(x, y));
}
BENCHMARK(BM_LeastSquares)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);

void BM_FourierBasis(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(fourier_basis(static_cast<int>(state.range(0))));
}
BENCHMARK(BM_FourierBasis)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);

void BM_FourierSpectrum(benchmark::State& state) {
  const PCAResult p = pca(helix(1000, 256), static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fourier_spectrum(p));
}
BENCHMARK(BM_FourierSpectrum)->Arg(16)->Arg(128)->Unit(benchmark::kMicrosecond);

void BM_Pca(benchmark::State& state) {
  const EmbeddingMatrix m = helix(1000, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(pca(m, 16));
}
BENCHMARK(BM_Pca)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
