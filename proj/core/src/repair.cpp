// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#include "numprobe/repair.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "numprobe/error.hpp"
#include "parallel.hpp"

namespace numprobe {

namespace {

double cosine_of(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return na == nb ? 1.0 : 0.0;
  return a.dot(b) / (na * nb);
}

/// Logits are score_matrix * (x - mean); score_matrix = (W_out S)^T-codes * W_in.
struct FrozenProbe {
  Matrix score_matrix;  // |candidates| x d
  std::optional<Vector> mean;
  std::vector<Label> candidates;
  std::vector<std::int64_t> allowed;

  FrozenProbe(const ClassifierProbe& probe, std::span<const Label> cands)
      : mean(probe.input_mean()), candidates(cands.begin(), cands.end()), allowed(cands.size()) {
    score_matrix.noalias() = probe.label_codes(cands) * probe.w_in();
    std::iota(allowed.begin(), allowed.end(), std::int64_t{0});
  }

  EmbeddingObjective evaluate(const Vector& x, std::int64_t target) const {
    const Vector logits = mean ? Vector(score_matrix * (x - *mean)) : Vector(score_matrix * x);
    LossAndGrad ce = restricted_cross_entropy({logits.data(), static_cast<std::size_t>(logits.size())},
                                              target, allowed);
    EmbeddingObjective out;
    out.loss = ce.loss;
    out.grad = score_matrix.transpose() *
               Eigen::Map<const Vector>(ce.grad.data(), static_cast<Eigen::Index>(ce.grad.size()));

    double runner_up = -std::numeric_limits<double>::infinity();
    Eigen::Index best = 0;
    for (Eigen::Index j = 0; j < logits.size(); ++j) {
      if (j != target) runner_up = std::max(runner_up, logits(j));
      const auto lj = candidates[static_cast<std::size_t>(j)];
      const auto lb = candidates[static_cast<std::size_t>(best)];
      if (logits(j) > logits(best) || (logits(j) == logits(best) && lj < lb)) best = j;
    }
    out.margin = logits(target) - runner_up;
    out.decoded = candidates[static_cast<std::size_t>(best)];
    return out;
  }

  std::int64_t index_of(Label l) const {
    auto it = std::find(candidates.begin(), candidates.end(), l);
    if (it == candidates.end()) throw PreconditionError("label " + std::to_string(l) + " is not a candidate");
    return it - candidates.begin();
  }
};

}  // namespace

void RepairConfig::validate() const {
  if (!(lr > 0.0)) throw PreconditionError("repair lr must be positive");
  if (max_steps < 1) throw PreconditionError("repair max_steps must be positive");
  if (!(margin >= 0.0)) throw PreconditionError("repair margin must be non-negative");
  if (max_displacement && !(*max_displacement > 0.0)) {
    throw PreconditionError("max_displacement must be positive when set");
  }
}

void to_json(nlohmann::json& j, const RepairConfig& c) {
  j = nlohmann::json{{"lr", c.lr},
                     {"max_steps", c.max_steps},
                     {"margin", c.margin},
                     {"max_displacement", c.max_displacement ? nlohmann::json(*c.max_displacement) : nlohmann::json()},
                     {"seed", c.seed}};
}

bool RepairReport::all_succeeded() const {
  return std::all_of(tokens.begin(), tokens.end(), [](const auto& t) { return t.success; });
}

void to_json(nlohmann::json& j, const RepairReport& r) {
  nlohmann::json tokens = nlohmann::json::array();
  for (const auto& t : r.tokens) {
    nlohmann::json e{{"label", t.label},
                     {"success", t.success},
                     {"steps_used", t.steps_used},
                     {"initial_loss", t.initial_loss},
                     {"final_loss", t.final_loss},
                     {"final_margin", t.final_margin},
                     {"final_decoded", t.final_decoded},
                     {"l2_displacement", t.l2_displacement},
                     {"cosine", t.cosine}};
    if (!t.error.empty()) e["error"] = t.error;
    tokens.push_back(std::move(e));
  }
  j = nlohmann::json{{"config", r.config}, {"all_succeeded", r.all_succeeded()}, {"tokens", tokens}};
}

EmbeddingObjective embedding_objective(const ClassifierProbe& probe, const Eigen::Ref<const Vector>& x,
                                       Label target, std::span<const Label> candidates) {
  if (x.size() != probe.input_dim()) throw PreconditionError("embedding_objective: dimension mismatch");
  const FrozenProbe frozen(probe, candidates);
  return frozen.evaluate(x, frozen.index_of(target));
}

RepairResult repair_embeddings(const EmbeddingMatrix& m, const ClassifierProbe& probe,
                               std::span<const Label> targets, const RepairConfig& cfg, int threads) {
  cfg.validate();
  if (m.dim() != probe.input_dim()) {
    throw PreconditionError("embeddings have d=" + std::to_string(m.dim()) + ", probe expects " +
                            std::to_string(probe.input_dim()));
  }
  std::vector<Label> sorted_targets(targets.begin(), targets.end());
  std::sort(sorted_targets.begin(), sorted_targets.end());
  sorted_targets.erase(std::unique(sorted_targets.begin(), sorted_targets.end()), sorted_targets.end());
  for (Label t : sorted_targets) {
    if (!m.contains(t)) throw PreconditionError("repair target " + std::to_string(t) + " is not a label of the matrix");
  }

  const FrozenProbe frozen(probe, m.labels());
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;

  RepairReport report;
  report.config = cfg;
  report.tokens.resize(sorted_targets.size());
  Matrix new_rows(static_cast<Eigen::Index>(sorted_targets.size()), m.dim());

  detail::parallel_for(sorted_targets.size(), threads, [&](std::size_t i) {
    const Label label = sorted_targets[i];
    const auto row = *m.find(label);
    const std::int64_t target = row;  // candidates are the matrix labels in row order
    const Vector original = m.values().row(row).transpose();
    Vector x = original;
    TokenRepair& out = report.tokens[i];
    out.label = label;

    EmbeddingObjective obj = frozen.evaluate(x, target);
    out.initial_loss = obj.loss;
    AdamState adam(static_cast<std::size_t>(x.size()), adam_cfg);
    int steps = 0;
    while (std::isfinite(obj.loss) && obj.margin < cfg.margin && steps < cfg.max_steps) {
      adam_step({x.data(), static_cast<std::size_t>(x.size())},
                {obj.grad.data(), static_cast<std::size_t>(obj.grad.size())}, adam);
      if (cfg.max_displacement) {
        const Vector delta = x - original;
        const double norm = delta.norm();
        if (norm > *cfg.max_displacement) x = original + delta * (*cfg.max_displacement / norm);
      }
      ++steps;
      obj = frozen.evaluate(x, target);
    }

    if (!std::isfinite(obj.loss) || !x.allFinite()) {
      out.error = "non-finite loss after " + std::to_string(steps) + " steps";
      out.steps_used = steps;
      out.final_loss = obj.loss;
      x = original;
      obj = frozen.evaluate(x, target);
      out.final_decoded = obj.decoded;
      out.final_margin = obj.margin;
      out.success = false;
    } else {
      out.steps_used = steps;
      out.final_loss = obj.loss;
      out.final_margin = obj.margin;
      out.final_decoded = obj.decoded;
      out.success = obj.decoded == label && obj.margin >= cfg.margin;
    }
    out.l2_displacement = (x - original).norm();
    out.cosine = cosine_of(original, x);
    new_rows.row(static_cast<Eigen::Index>(i)) = x.transpose();
  });

  // Untouched tokens keep their exact bits; only rows that moved are replaced.
  std::vector<Label> moved;
  std::vector<Eigen::Index> moved_rows;
  for (std::size_t i = 0; i < sorted_targets.size(); ++i) {
    if (report.tokens[i].steps_used > 0 && report.tokens[i].error.empty()) {
      moved.push_back(sorted_targets[i]);
      moved_rows.push_back(static_cast<Eigen::Index>(i));
    }
  }
  Matrix replacement(static_cast<Eigen::Index>(moved.size()), m.dim());
  for (std::size_t i = 0; i < moved_rows.size(); ++i) {
    replacement.row(static_cast<Eigen::Index>(i)) = new_rows.row(moved_rows[i]);
  }
  return {m.with_rows(moved, replacement), std::move(report)};
}

std::vector<Displacement> repair_diff(const EmbeddingMatrix& original, const EmbeddingMatrix& repaired) {
  if (original.rows() != repaired.rows() || original.dim() != repaired.dim() ||
      !std::equal(original.labels().begin(), original.labels().end(), repaired.labels().begin())) {
    throw PreconditionError("repair_diff: matrices differ in shape or labels");
  }
  std::vector<Displacement> out(static_cast<std::size_t>(original.rows()));
  for (Eigen::Index i = 0; i < original.rows(); ++i) {
    const Vector a = original.values().row(i).transpose();
    const Vector b = repaired.values().row(i).transpose();
    auto& d = out[static_cast<std::size_t>(i)];
    d.label = original.labels()[static_cast<std::size_t>(i)];
    if (a == b) continue;
    d.l2 = (b - a).norm();
    d.cosine_delta = 1.0 - cosine_of(a, b);
  }
  return out;
}

}  // namespace numprobe
