// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "numprobe/basis.hpp"
#include "numprobe/embstore.hpp"
#include "numprobe/optim.hpp"
#include "numprobe/types.hpp"

namespace numprobe {

// ---------------------------------------------------------------------------
// Regression probes:  f(x) = a.x + b   and   f(x) = exp(a.x + b) - 1
// ---------------------------------------------------------------------------

enum class RegressionMode { linear, loglinear };

std::string_view to_string(RegressionMode mode);

struct RegressionProbe {
  Vector a;
  double b = 0.0;
  RegressionMode mode = RegressionMode::linear;
};

struct RegressionPrediction {
  double raw = 0.0;
  Label decoded = 0;
};

/// Nearest integer, ties away from zero. Non-finite input maps to -1, which
/// is never a valid label.
Label round_to_label(double raw);

RegressionProbe fit_regression(const EmbeddingMatrix& train, RegressionMode mode);

/// Same as above on raw rows; exposed for callers that hold unlabeled arrays.
RegressionProbe fit_regression(const Matrix& X, std::span<const Label> labels, RegressionMode mode);

RegressionPrediction predict_regression(const RegressionProbe& p,
                                        const Eigen::Ref<const Vector>& x);

// ---------------------------------------------------------------------------
// Classifier probes:  scores = (W_out S)^T (W_in x)
// ---------------------------------------------------------------------------

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool decoupled_weight_decay = true;
  int hidden_dim = 100;
  Regularization regularization = Regularization::none;
  double reg_lambda = 0.0;
  int max_epochs = 2000;
  int patience = 20;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  /// Subtract the per-feature training mean before W_in.
  bool center_inputs = false;

  /// Throws PreconditionError when a field is out of range.
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

/**
 * Bilinear classifier over a fixed integer basis.
 *
 * The score of label i for an embedding x is (W_out s_i) . (W_in x), where
 * s_i is row i of the basis. W_in is h x d and W_out is h x k, so both sides
 * land in the same h-dimensional space.
 */
class ClassifierProbe {
 public:
  ClassifierProbe(Matrix w_in, Matrix w_out, std::shared_ptr<const BasisMatrix> basis,
                  TrainConfig config = {}, std::vector<EpochRecord> history = {},
                  std::optional<Vector> input_mean = std::nullopt, int best_epoch = -1);

  const Matrix& w_in() const noexcept { return w_in_; }
  const Matrix& w_out() const noexcept { return w_out_; }
  const BasisMatrix& basis() const noexcept { return *basis_; }
  const std::shared_ptr<const BasisMatrix>& basis_ptr() const noexcept { return basis_; }
  const TrainConfig& train_config() const noexcept { return config_; }
  const std::vector<EpochRecord>& train_history() const noexcept { return history_; }
  const std::optional<Vector>& input_mean() const noexcept { return input_mean_; }
  int best_epoch() const noexcept { return best_epoch_; }

  int hidden_dim() const noexcept { return static_cast<int>(w_in_.rows()); }
  int input_dim() const noexcept { return static_cast<int>(w_in_.cols()); }

  /// W_in (x - mean) for one embedding.
  Vector hidden(const Eigen::Ref<const Vector>& x) const;

  /// Rows are (W_out s_l)^T for each label, i.e. |labels| x h.
  Matrix label_codes(std::span<const Label> labels) const;

  /// Score of every candidate, in candidate order.
  Vector scores(const Eigen::Ref<const Vector>& x, std::span<const Label> candidates) const;

  friend bool operator==(const ClassifierProbe& a, const ClassifierProbe& b);

 private:
  Matrix w_in_;
  Matrix w_out_;
  std::shared_ptr<const BasisMatrix> basis_;
  TrainConfig config_;
  std::vector<EpochRecord> history_;
  std::optional<Vector> input_mean_;
  int best_epoch_;
};

/// Value and gradients of the mean restricted cross-entropy (plus penalty).
struct ClassifierLoss {
  double loss = 0.0;
  Matrix grad_w_in;
  Matrix grad_w_out;
};

/**
 * Training objective of the classifier probes.
 *
 * `inputs` holds one embedding per row (already centred if applicable),
 * `candidate_basis` holds the basis rows of the candidate labels, and
 * `targets[i]` is the candidate index of row i's true label. The softmax runs
 * over the candidates only.
 */
ClassifierLoss classifier_loss(const Matrix& w_in, const Matrix& w_out, const Matrix& inputs,
                               const Matrix& candidate_basis,
                               std::span<const Eigen::Index> targets,
                               Regularization reg = Regularization::none, double reg_lambda = 0.0);

/**
 * Fits W_in and W_out with full-batch Adam on restricted cross-entropy.
 *
 * A seeded `val_fraction` slice of the rows is held out; the softmax during
 * fitting runs over the remaining (fitting) labels only, and the validation
 * loss runs over all labels of `train`. Training stops once the validation
 * loss has not improved for `patience` epochs, and the parameters of the best
 * validation epoch are returned.
 */
ClassifierProbe train_classifier(const EmbeddingMatrix& train,
                                 std::shared_ptr<const BasisMatrix> basis, const TrainConfig& cfg);

struct ClassifierDecode {
  std::map<Label, double> scores;
  Label decoded = 0;
};

/// Argmax over candidates; ties go to the smallest label.
ClassifierDecode decode_classifier(const ClassifierProbe& p, const Eigen::Ref<const Vector>& x,
                                   std::span<const Label> candidates);

/// Decodes every row of `inputs` at once (same tie rule, no score map).
std::vector<Label> decode_batch(const ClassifierProbe& p, const Matrix& inputs,
                                std::span<const Label> candidates);

/// Row i is W_in (values_i - mean).
Matrix hidden_codes(const ClassifierProbe& p, const EmbeddingMatrix& m);

// ---------------------------------------------------------------------------
// Serialization: "NUMPRB01", u32 LE header length, JSON header, f64 payload.
// ---------------------------------------------------------------------------

void save_probe(const ClassifierProbe& p, const std::filesystem::path& path);
void save_probe(const RegressionProbe& p, const std::filesystem::path& path);

ClassifierProbe load_classifier_probe(const std::filesystem::path& path);
RegressionProbe load_regression_probe(const std::filesystem::path& path);

/// "classifier" or "regression", read from the header alone.
std::string probe_file_kind(const std::filesystem::path& path);

}  // namespace numprobe
