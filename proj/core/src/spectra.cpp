// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#include "numprobe/spectra.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>

#include <Eigen/SVD>
#include <fftw3.h>

#include "numprobe/error.hpp"

namespace numprobe {

namespace {

// FFTW's planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void append_number(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

void write_labeled_rows(const std::filesystem::path& path, const std::string& prefix,
                        std::span<const Label> labels, const Matrix& rows) {
  std::string text = "label";
  for (Eigen::Index j = 0; j < rows.cols(); ++j) text += "," + prefix + std::to_string(j);
  text += '\n';
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    text += std::to_string(labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      text += ',';
      append_number(text, rows(i, j));
    }
    text += '\n';
  }
  write_text(path, text);
}

}  // namespace

std::vector<double> PCAResult::explained_variance_ratio() const {
  std::vector<double> out(explained_variance.size(), 0.0);
  if (total_variance <= 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = explained_variance[i] / total_variance;
  return out;
}

PCAResult pca(const EmbeddingMatrix& m, int n_components) {
  const auto max_c = std::min(m.rows(), m.dim());
  if (n_components < 1 || n_components > max_c) {
    throw PreconditionError("n_components must lie in [1, " + std::to_string(max_c) + "], got " +
                            std::to_string(n_components));
  }
  PCAResult out;
  out.labels.assign(m.labels().begin(), m.labels().end());
  out.mean = m.values().colwise().mean().transpose();
  const Eigen::MatrixXd centered = m.values().rowwise() - out.mean.transpose();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double denom = static_cast<double>(std::max<Eigen::Index>(m.rows() - 1, 1));
  out.total_variance = s.squaredNorm() / denom;

  out.components = svd.matrixV().leftCols(n_components).transpose();
  for (Eigen::Index c = 0; c < out.components.rows(); ++c) {
    Eigen::Index arg = 0;
    out.components.row(c).cwiseAbs().maxCoeff(&arg);
    if (out.components(c, arg) < 0.0) out.components.row(c) *= -1.0;
    out.explained_variance.push_back(s(c) * s(c) / denom);
  }
  out.projected.noalias() = centered * out.components.transpose();
  return out;
}

std::vector<double> dft_magnitudes(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n == 0) return {};
  std::vector<double> in(series.begin(), series.end());
  std::vector<std::complex<double>> out(n / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(),
                                reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  std::vector<double> mags(out.size());
  std::transform(out.begin(), out.end(), mags.begin(), [](auto c) { return std::abs(c); });
  return mags;
}

double bin_weight(std::size_t k, std::size_t n_samples) {
  const bool nyquist = n_samples % 2 == 0 && k == n_samples / 2;
  return (k == 0 || nyquist) ? 1.0 : 2.0;
}

double spectral_energy(std::span<const double> magnitudes, std::size_t n_samples) {
  double total = 0.0;
  for (std::size_t k = 0; k < magnitudes.size(); ++k) {
    total += bin_weight(k, n_samples) * magnitudes[k] * magnitudes[k];
  }
  return total / static_cast<double>(n_samples);
}

double dominant_bin_share(std::span<const double> series) {
  if (series.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(series.size());
  std::vector<double> centered(series.begin(), series.end());
  for (double& v : centered) v -= mean;

  const auto mags = dft_magnitudes(centered);
  const double total = spectral_energy(mags, series.size());
  if (total <= 0.0) return 0.0;
  double best = 0.0;
  for (std::size_t k = 1; k < mags.size(); ++k) {
    best = std::max(best, bin_weight(k, series.size()) * mags[k] * mags[k]);
  }
  return best / static_cast<double>(series.size()) / total;
}

double top_bin_energy_share(std::span<const double> magnitudes, double fraction) {
  if (magnitudes.empty()) return 0.0;
  std::vector<double> energy(magnitudes.size());
  std::transform(magnitudes.begin(), magnitudes.end(), energy.begin(), [](double m) { return m * m; });
  const double total = std::accumulate(energy.begin(), energy.end(), 0.0);
  if (total <= 0.0) return 0.0;
  const auto top = std::min(energy.size(),
                            static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(energy.size()))));
  std::partial_sort(energy.begin(), energy.begin() + static_cast<std::ptrdiff_t>(top), energy.end(),
                    std::greater<>());
  return std::accumulate(energy.begin(), energy.begin() + static_cast<std::ptrdiff_t>(top), 0.0) / total;
}

SpectrumReport fourier_spectrum(const PCAResult& p) {
  const auto n = static_cast<std::size_t>(p.projected.rows());
  if (n < 4) throw PreconditionError("fourier_spectrum needs at least 4 rows, got " + std::to_string(n));
  if (p.labels.size() != n) throw PreconditionError("fourier_spectrum: label count mismatch");
  for (std::size_t i = 1; i < n; ++i) {
    if (p.labels[i] != p.labels[i - 1] + 1) {
      throw PreconditionError("fourier_spectrum needs contiguous ascending labels; gap after " +
                              std::to_string(p.labels[i - 1]));
    }
  }
  SpectrumReport out;
  out.n_samples = n;
  out.component_count = static_cast<int>(p.projected.cols());
  out.max_magnitude.assign(n / 2 + 1, 0.0);
  std::vector<double> column(n);
  for (Eigen::Index c = 0; c < p.projected.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) column[i] = p.projected(static_cast<Eigen::Index>(i), c);
    const auto mags = dft_magnitudes(column);
    for (std::size_t k = 0; k < mags.size(); ++k) {
      out.max_magnitude[k] = std::max(out.max_magnitude[k], mags[k]);
    }
  }
  out.sparsity = top_bin_energy_share(out.max_magnitude, 0.05);
  return out;
}

void write_spectrum_csv(const SpectrumReport& s, const std::filesystem::path& path) {
  std::string text = "bin_index,frequency_cycles_per_token,max_magnitude\n";
  for (std::size_t k = 0; k < s.max_magnitude.size(); ++k) {
    text += std::to_string(k);
    text += ',';
    append_number(text, static_cast<double>(k) / static_cast<double>(s.n_samples));
    text += ',';
    append_number(text, s.max_magnitude[k]);
    text += '\n';
  }
  write_text(path, text);
}

void write_pca_csv(const PCAResult& p, const std::filesystem::path& path) {
  write_labeled_rows(path, "pc_", p.labels, p.projected);
}

void dump_hidden_waves(const ClassifierProbe& p, const EmbeddingMatrix& m,
                       const std::filesystem::path& path) {
  write_labeled_rows(path, "unit_", m.labels(), hidden_codes(p, m));
}

}  // namespace numprobe
