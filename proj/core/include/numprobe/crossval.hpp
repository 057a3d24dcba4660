// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "numprobe/basis.hpp"
#include "numprobe/embstore.hpp"
#include "numprobe/probes.hpp"

namespace numprobe {

enum class ProbeKind { lin, loglin, sin, bin };

std::string_view to_string(ProbeKind kind);
ProbeKind parse_probe_kind(std::string_view text);
bool is_classifier(ProbeKind kind);

/// Everything needed to fit one probe of a given kind.
struct ProbeSpec {
  ProbeKind kind = ProbeKind::sin;
  TrainConfig train;
  FrequencySpec frequencies;
  int fourier_features = kDefaultFourierFeatures;
};

void to_json(nlohmann::json& j, const ProbeSpec& spec);
void from_json(const nlohmann::json& j, ProbeSpec& spec);

/// Basis of a classifier spec covering labels [0, n_classes).
std::shared_ptr<const BasisMatrix> make_basis(const ProbeSpec& spec, int n_classes);

struct TokenOutcome {
  Label label = 0;
  int fold = 0;
  Label decoded = 0;
  bool correct = false;
};

struct CVReport {
  ProbeKind probe_kind = ProbeKind::sin;
  int fold_count = 0;
  std::vector<double> per_fold_accuracy;
  double mean_accuracy = 0.0;
  /// Sorted by label.
  std::vector<TokenOutcome> per_token;
  ProbeSpec spec;
  std::uint64_t seed = 0;
  std::string model_name;
  /// "none", "gaussian" or "permutation".
  std::string control = "none";
};

void to_json(nlohmann::json& j, const CVReport& r);
void from_json(const nlohmann::json& j, CVReport& r);

/// Writes `label,fold,decoded,correct` rows.
void write_token_csv(const CVReport& r, const std::filesystem::path& path);

/// Seeded split of `labels` into `folds` test sets whose sizes differ by at most one.
std::vector<std::vector<Label>> fold_partition(std::span<const Label> labels, int folds,
                                               std::uint64_t seed);

/**
 * K-fold cross-validation over labels.
 *
 * Each fold's probe is fit on the other folds (classifiers carve their
 * validation slice from that portion) and scored on the fold's labels with
 * every label of `m` as a candidate. Folds run on up to `threads` workers; the
 * report does not depend on the thread count.
 */
CVReport cross_validate(const EmbeddingMatrix& m, const ProbeSpec& spec, int folds = 20,
                        std::uint64_t seed = 0, int threads = 1);

/// Cross-validation on fresh standard-normal values carrying the labels of `m`.
CVReport control_gaussian(const EmbeddingMatrix& m, const ProbeSpec& spec, int folds = 20,
                          std::uint64_t seed = 0, int threads = 1);

/// Cross-validation after a seeded shuffle of the labels over fixed rows.
/// Permutations leaving more than 1% of labels in place are redrawn.
CVReport control_permutation(const EmbeddingMatrix& m, const ProbeSpec& spec, int folds = 20,
                             std::uint64_t seed = 0, int threads = 1);

/// The label permutation `control_permutation` applies (exposed for tests).
std::vector<Label> control_permutation_labels(std::span<const Label> labels, std::uint64_t seed);

struct DecodabilityTable {
  ProbeKind probe_kind = ProbeKind::sin;
  std::string model_name;
  /// (label, decodable), sorted by label.
  std::vector<std::pair<Label, bool>> entries;

  std::vector<Label> undecodable() const;
  std::size_t decodable_count() const;
};

void to_json(nlohmann::json& j, const DecodabilityTable& t);

/**
 * Per-label decodability from the test-fold outcomes of the reports of kind
 * `kind`. Throws DataError when a label of `expected_labels` is not covered,
 * or is covered twice.
 */
DecodabilityTable decodability_table(std::span<const CVReport> reports, ProbeKind kind,
                                     std::span<const Label> expected_labels);

}  // namespace numprobe
