// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "numprobe/embstore.hpp"
#include "numprobe/probes.hpp"

namespace numprobe {

struct RepairConfig {
  double lr = 1e-2;
  int max_steps = 5000;
  /// Required gap between the target's logit and the best other logit.
  double margin = 1.0;
  /// Radius of the L2 ball around the original embedding, if any.
  std::optional<double> max_displacement;
  /// Recorded in reports; the descent itself draws no random numbers.
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const RepairConfig& c);

struct TokenRepair {
  Label label = 0;
  /// Decodes to its own label with at least the configured margin.
  bool success = false;
  int steps_used = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double final_margin = 0.0;
  Label final_decoded = 0;
  double l2_displacement = 0.0;
  double cosine = 1.0;
  /// Non-empty when the repair of this token failed numerically.
  std::string error;
};

struct RepairReport {
  RepairConfig config;
  std::vector<TokenRepair> tokens;

  bool all_succeeded() const;
};

void to_json(nlohmann::json& j, const RepairReport& r);

struct RepairResult {
  EmbeddingMatrix repaired;
  RepairReport report;
};

/// Loss, gradient and margin of one embedding against a frozen probe.
struct EmbeddingObjective {
  double loss = 0.0;
  Vector grad;
  double margin = 0.0;
  Label decoded = 0;
};

/// Cross-entropy of `target` over all `candidates` as a function of the embedding `x`.
EmbeddingObjective embedding_objective(const ClassifierProbe& probe, const Eigen::Ref<const Vector>& x,
                                       Label target, std::span<const Label> candidates);

/**
 * Moves each target embedding by Adam on the frozen probe's decoding loss
 * (all labels of `m` as candidates, the token's own label as target) until the
 * logit margin is met or `max_steps` is reached. Rows of non-targets are
 * copied verbatim; tokens that already satisfy the margin are not touched.
 */
RepairResult repair_embeddings(const EmbeddingMatrix& m, const ClassifierProbe& probe,
                               std::span<const Label> targets, const RepairConfig& cfg,
                               int threads = 1);

struct Displacement {
  Label label = 0;
  double l2 = 0.0;
  /// 1 - cos(original, repaired); zero for untouched rows.
  double cosine_delta = 0.0;
};

std::vector<Displacement> repair_diff(const EmbeddingMatrix& original, const EmbeddingMatrix& repaired);

}  // namespace numprobe
