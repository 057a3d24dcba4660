// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "numprobe/types.hpp"

namespace numprobe {

enum class DType { f32, f64 };
enum class FileFormat { emb1, npy_pair };

std::string_view to_string(DType dtype);
DType parse_dtype(std::string_view text);
std::string_view to_string(FileFormat format);
FileFormat parse_file_format(std::string_view text);

/**
 * N x d matrix of number-token embeddings with the integer label of each row.
 *
 * Construction validates every invariant (N >= 2, d >= 1, distinct labels in
 * [0, 1e9), finite values) and sorts rows ascending by label, so any two
 * matrices holding the same (label, row) pairs compare equal regardless of the
 * order they were built in. Values are always held in double precision;
 * `dtype_on_disk` only records the precision of the file they came from.
 */
class EmbeddingMatrix {
 public:
  EmbeddingMatrix(Matrix values, std::vector<Label> labels, std::string model_name = {},
                  DType dtype_on_disk = DType::f64);

  const Matrix& values() const noexcept { return values_; }
  std::span<const Label> labels() const noexcept { return labels_; }
  const std::string& model_name() const noexcept { return model_name_; }
  DType dtype_on_disk() const noexcept { return dtype_; }

  Eigen::Index rows() const noexcept { return values_.rows(); }
  Eigen::Index dim() const noexcept { return values_.cols(); }

  /// Row index holding `label`, if present.
  std::optional<Eigen::Index> find(Label label) const;
  bool contains(Label label) const { return find(label).has_value(); }
  Label max_label() const noexcept { return labels_.back(); }

  /// Sub-matrix of the rows whose labels are listed (any order, no duplicates).
  EmbeddingMatrix subset(std::span<const Label> labels) const;

  /// Copy with the given rows overwritten; every other row is copied verbatim.
  EmbeddingMatrix with_rows(std::span<const Label> labels, const Matrix& rows) const;

  EmbeddingMatrix with_values(Matrix values) const;
  EmbeddingMatrix with_labels(std::vector<Label> labels) const;

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b);

 private:
  Matrix values_;
  std::vector<Label> labels_;
  std::string model_name_;
  DType dtype_;
};

struct SaveInfo {
  DType dtype;
  /// True when at least one value did not survive narrowing to the on-disk dtype.
  bool lossy = false;
  std::vector<std::filesystem::path> files;
};

/// Loads an EMB1 file, or an NPY pair when `path` is the shared stem.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path, FileFormat format);

/// Writes `m` at `dtype` (defaults to the matrix's own on-disk dtype).
SaveInfo save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path,
                         FileFormat format, std::optional<DType> dtype = std::nullopt);

/// Guesses the format from the path: `*.npy` stems or existing `<stem>.values.npy` mean npy_pair.
FileFormat detect_format(const std::filesystem::path& path);

namespace npy {

/// Minimal NPY v1.0 array: little-endian, C order, 1-D or 2-D.
struct Array {
  std::string descr;  // "<f4", "<f8", "<i8", ...
  std::vector<std::size_t> shape;
  std::vector<char> bytes;
};

Array read(const std::filesystem::path& path);
void write(const std::filesystem::path& path, const Array& array);

std::filesystem::path values_path(const std::filesystem::path& stem);
std::filesystem::path labels_path(const std::filesystem::path& stem);

}  // namespace npy

}  // namespace numprobe
