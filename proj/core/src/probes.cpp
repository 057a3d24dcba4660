// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#include "numprobe/probes.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "numprobe/error.hpp"

namespace numprobe {

// ---------------------------------------------------------------------------
// Regression
// ---------------------------------------------------------------------------

std::string_view to_string(RegressionMode mode) {
  return mode == RegressionMode::linear ? "linear" : "loglinear";
}

Label round_to_label(double raw) {
  if (!std::isfinite(raw)) return -1;
  constexpr double kLimit = 9.0e18;
  if (raw >= kLimit) return static_cast<Label>(kLimit);
  if (raw <= -kLimit) return -static_cast<Label>(kLimit);
  return static_cast<Label>(std::llround(raw));
}

RegressionProbe fit_regression(const Matrix& X, std::span<const Label> labels, RegressionMode mode) {
  if (static_cast<Eigen::Index>(labels.size()) != X.rows()) {
    throw PreconditionError("fit_regression: one label per row required");
  }
  Vector y(X.rows());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Label l = labels[i];
    if (mode == RegressionMode::loglinear && l < 0) {
      throw PreconditionError("log-linear probe needs non-negative labels, got " + std::to_string(l));
    }
    y(static_cast<Eigen::Index>(i)) =
        mode == RegressionMode::linear ? static_cast<double>(l) : std::log1p(static_cast<double>(l));
  }
  LinearFit fit = least_squares(X, y);
  return {std::move(fit.coeffs), fit.intercept, mode};
}

RegressionProbe fit_regression(const EmbeddingMatrix& train, RegressionMode mode) {
  return fit_regression(train.values(), train.labels(), mode);
}

RegressionPrediction predict_regression(const RegressionProbe& p, const Eigen::Ref<const Vector>& x) {
  if (x.size() != p.a.size()) {
    throw PreconditionError("predict_regression: probe has d=" + std::to_string(p.a.size()) +
                            ", input has " + std::to_string(x.size()));
  }
  const double linear = p.a.dot(x) + p.b;
  const double raw = p.mode == RegressionMode::linear ? linear : std::expm1(linear);
  return {raw, round_to_label(raw)};
}

// ---------------------------------------------------------------------------
// TrainConfig
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw PreconditionError("lr must be positive");
  if (weight_decay < 0.0) throw PreconditionError("weight_decay must be non-negative");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw PreconditionError("betas must lie in (0, 1)");
  }
  if (hidden_dim < 1) throw PreconditionError("hidden_dim must be positive");
  if (reg_lambda < 0.0) throw PreconditionError("reg_lambda must be non-negative");
  if ((reg_lambda == 0.0) != (regularization == Regularization::none)) {
    throw PreconditionError("reg_lambda must be zero exactly when regularization is none");
  }
  if (max_epochs < 1) throw PreconditionError("max_epochs must be positive");
  if (patience < 1 || patience >= max_epochs) {
    throw PreconditionError("patience must be in [1, max_epochs)");
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw PreconditionError("val_fraction must lie in (0, 1)");
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"lr", c.lr},
                     {"weight_decay", c.weight_decay},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"eps", c.eps},
                     {"decoupled_weight_decay", c.decoupled_weight_decay},
                     {"hidden_dim", c.hidden_dim},
                     {"regularization", std::string(to_string(c.regularization))},
                     {"reg_lambda", c.reg_lambda},
                     {"max_epochs", c.max_epochs},
                     {"patience", c.patience},
                     {"val_fraction", c.val_fraction},
                     {"seed", c.seed},
                     {"center_inputs", c.center_inputs},
                     {"init_scale", "1/sqrt(fan_in)"}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.lr = j.value("lr", d.lr);
  c.weight_decay = j.value("weight_decay", d.weight_decay);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.eps = j.value("eps", d.eps);
  c.decoupled_weight_decay = j.value("decoupled_weight_decay", d.decoupled_weight_decay);
  c.hidden_dim = j.value("hidden_dim", d.hidden_dim);
  c.regularization = parse_regularization(j.value("regularization", std::string("none")));
  c.reg_lambda = j.value("reg_lambda", d.reg_lambda);
  c.max_epochs = j.value("max_epochs", d.max_epochs);
  c.patience = j.value("patience", d.patience);
  c.val_fraction = j.value("val_fraction", d.val_fraction);
  c.seed = j.value("seed", d.seed);
  c.center_inputs = j.value("center_inputs", d.center_inputs);
}

// ---------------------------------------------------------------------------
// ClassifierProbe
// ---------------------------------------------------------------------------

ClassifierProbe::ClassifierProbe(Matrix w_in, Matrix w_out, std::shared_ptr<const BasisMatrix> basis,
                                 TrainConfig config, std::vector<EpochRecord> history,
                                 std::optional<Vector> input_mean, int best_epoch)
    : w_in_(std::move(w_in)),
      w_out_(std::move(w_out)),
      basis_(std::move(basis)),
      config_(config),
      history_(std::move(history)),
      input_mean_(std::move(input_mean)),
      best_epoch_(best_epoch) {
  if (!basis_) throw PreconditionError("classifier probe needs a basis");
  if (w_in_.rows() != w_out_.rows()) {
    throw PreconditionError("W_in and W_out must share the hidden dimension");
  }
  if (w_out_.cols() != basis_->n_features()) {
    throw PreconditionError("W_out has " + std::to_string(w_out_.cols()) +
                            " columns but the basis has " + std::to_string(basis_->n_features()));
  }
  if (input_mean_ && input_mean_->size() != w_in_.cols()) {
    throw PreconditionError("input mean does not match W_in's input dimension");
  }
  if (!w_in_.allFinite() || !w_out_.allFinite()) {
    throw DataError("classifier probe parameters must be finite");
  }
}

Vector ClassifierProbe::hidden(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != w_in_.cols()) {
    throw PreconditionError("input has dimension " + std::to_string(x.size()) + ", probe expects " +
                            std::to_string(w_in_.cols()));
  }
  if (input_mean_) return w_in_ * (x - *input_mean_);
  return w_in_ * x;
}

namespace {

Matrix basis_rows(const BasisMatrix& basis, std::span<const Label> labels) {
  Matrix rows(static_cast<Eigen::Index>(labels.size()), basis.n_features());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Label l = labels[i];
    if (l < 0 || l >= basis.n_classes()) {
      throw PreconditionError("label " + std::to_string(l) + " has no row in a basis of " +
                              std::to_string(basis.n_classes()) + " classes");
    }
    rows.row(static_cast<Eigen::Index>(i)) = basis.values().row(static_cast<Eigen::Index>(l));
  }
  return rows;
}

Matrix centered(const Matrix& values, const std::optional<Vector>& mean) {
  if (!mean) return values;
  return values.rowwise() - mean->transpose();
}

/// Softmax cross-entropy over each row, averaged; turns `logits` into dLoss/dLogits in place.
double cross_entropy_in_place(Matrix& logits, std::span<const Eigen::Index> targets) {
  const Eigen::Index n = logits.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto row = logits.row(i);
    const Eigen::Index t = targets[static_cast<std::size_t>(i)];
    const double max_logit = row.maxCoeff();
    const double target_logit = row(t);
    row.array() = (row.array() - max_logit).exp();
    const double sum = row.sum();
    total += max_logit + std::log(sum) - target_logit;
    row *= inv_n / sum;
    row(t) -= inv_n;
  }
  return total * inv_n;
}

/**
 * Forward and backward pass of the bilinear score X W_in^T W_out B^T.
 *
 * The two n x m products dominate the cost, so their shared inner dimension is
 * the smallest of d (input), h (hidden) and k (basis). Buffers persist across
 * calls so the training loop does not reallocate every epoch.
 */
class BilinearKernel {
 public:
  enum class Route { input, hidden, basis };

  static Route pick(Eigen::Index d, Eigen::Index h, Eigen::Index k) {
    if (d <= h && d <= k) return Route::input;
    if (k < h) return Route::basis;
    return Route::hidden;
  }

  const Matrix& logits(const Matrix& w_in, const Matrix& w_out, const Matrix& inputs,
                       const Matrix& candidate_basis) {
    switch (pick(w_in.cols(), w_in.rows(), w_out.cols())) {
      case Route::input:
        q_.noalias() = w_in.transpose() * w_out;
        r_.noalias() = candidate_basis * q_.transpose();
        logits_.noalias() = inputs * r_.transpose();
        break;
      case Route::basis:
        hidden_.noalias() = inputs * w_in.transpose();
        z_.noalias() = hidden_ * w_out;
        logits_.noalias() = z_ * candidate_basis.transpose();
        break;
      case Route::hidden:
        hidden_.noalias() = inputs * w_in.transpose();
        codes_.noalias() = candidate_basis * w_out.transpose();
        logits_.noalias() = hidden_ * codes_.transpose();
        break;
    }
    return logits_;
  }

  double loss(const Matrix& w_in, const Matrix& w_out, const Matrix& inputs,
              const Matrix& candidate_basis, std::span<const Eigen::Index> targets) {
    logits(w_in, w_out, inputs, candidate_basis);
    return cross_entropy_in_place(logits_, targets);
  }

  /// Loss plus gradients; must follow no other call (recomputes the forward pass).
  double loss_and_grad(const Matrix& w_in, const Matrix& w_out, const Matrix& inputs,
                       const Matrix& candidate_basis, std::span<const Eigen::Index> targets,
                       Matrix& grad_w_in, Matrix& grad_w_out) {
    const double value = loss(w_in, w_out, inputs, candidate_basis, targets);
    const Matrix& g = logits_;
    switch (pick(w_in.cols(), w_in.rows(), w_out.cols())) {
      case Route::input:
        dr_.noalias() = g.transpose() * inputs;
        dq_.noalias() = dr_.transpose() * candidate_basis;
        grad_w_in.noalias() = w_out * dq_.transpose();
        grad_w_out.noalias() = w_in * dq_;
        break;
      case Route::basis:
        dz_.noalias() = g * candidate_basis;
        grad_w_out.noalias() = hidden_.transpose() * dz_;
        dhidden_.noalias() = dz_ * w_out.transpose();
        grad_w_in.noalias() = dhidden_.transpose() * inputs;
        break;
      case Route::hidden:
        dhidden_.noalias() = g * codes_;
        dcodes_.noalias() = g.transpose() * hidden_;
        grad_w_out.noalias() = dcodes_.transpose() * candidate_basis;
        grad_w_in.noalias() = dhidden_.transpose() * inputs;
        break;
    }
    return value;
  }

 private:
  Matrix logits_;
  Matrix q_, r_, dr_, dq_;
  Matrix hidden_, z_, dz_, dhidden_;
  Matrix codes_, dcodes_;
};

Matrix compute_logits(const Matrix& w_in, const Matrix& w_out, const Matrix& inputs,
                      const Matrix& candidate_basis) {
  BilinearKernel kernel;
  return kernel.logits(w_in, w_out, inputs, candidate_basis);
}

Label argmax_smallest(const Eigen::Ref<const Eigen::RowVectorXd>& scores,
                      std::span<const Label> candidates) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < scores.size(); ++j) {
    const double s = scores(j);
    if (s > scores(best) ||
        (s == scores(best) && candidates[static_cast<std::size_t>(j)] <
                                  candidates[static_cast<std::size_t>(best)])) {
      best = j;
    }
  }
  return candidates[static_cast<std::size_t>(best)];
}

}  // namespace

Matrix ClassifierProbe::label_codes(std::span<const Label> labels) const {
  return basis_rows(*basis_, labels) * w_out_.transpose();
}

Vector ClassifierProbe::scores(const Eigen::Ref<const Vector>& x,
                               std::span<const Label> candidates) const {
  return label_codes(candidates) * hidden(x);
}

bool operator==(const ClassifierProbe& a, const ClassifierProbe& b) {
  auto same = [](const Matrix& x, const Matrix& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  const bool means_equal =
      a.input_mean_.has_value() == b.input_mean_.has_value() &&
      (!a.input_mean_ || (a.input_mean_->size() == b.input_mean_->size() &&
                          *a.input_mean_ == *b.input_mean_));
  return same(a.w_in_, b.w_in_) && same(a.w_out_, b.w_out_) && means_equal &&
         a.basis_->kind() == b.basis_->kind() && same(a.basis_->values(), b.basis_->values());
}

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

ClassifierLoss classifier_loss(const Matrix& w_in, const Matrix& w_out, const Matrix& inputs,
                               const Matrix& candidate_basis, std::span<const Eigen::Index> targets,
                               Regularization reg, double reg_lambda) {
  if (inputs.cols() != w_in.cols() || candidate_basis.cols() != w_out.cols() ||
      w_in.rows() != w_out.rows()) {
    throw PreconditionError("classifier_loss: shape mismatch");
  }
  for (auto t : targets) {
    if (t < 0 || t >= candidate_basis.rows()) {
      throw PreconditionError("classifier_loss: target index outside the candidate set");
    }
  }

  ClassifierLoss out;
  BilinearKernel kernel;
  out.loss = kernel.loss_and_grad(w_in, w_out, inputs, candidate_basis, targets, out.grad_w_in,
                                  out.grad_w_out);

  if (reg != Regularization::none && reg_lambda != 0.0) {
    out.loss += add_penalty(reg, reg_lambda, {w_in.data(), static_cast<std::size_t>(w_in.size())},
                            {out.grad_w_in.data(), static_cast<std::size_t>(out.grad_w_in.size())});
    out.loss += add_penalty(reg, reg_lambda, {w_out.data(), static_cast<std::size_t>(w_out.size())},
                            {out.grad_w_out.data(), static_cast<std::size_t>(out.grad_w_out.size())});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

ClassifierProbe train_classifier(const EmbeddingMatrix& train,
                                 std::shared_ptr<const BasisMatrix> basis, const TrainConfig& cfg) {
  cfg.validate();
  if (!basis) throw PreconditionError("train_classifier: basis is required");
  if (train.max_label() >= basis->n_classes()) {
    throw PreconditionError("training label " + std::to_string(train.max_label()) +
                            " has no basis row (basis covers " +
                            std::to_string(basis->n_classes()) + " classes)");
  }

  const auto n = static_cast<std::size_t>(train.rows());
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(n))), 1,
      n > 0 ? n - 1 : 0);
  if (n < 3 || n - n_val < 2) {
    throw PreconditionError("train_classifier: need at least 2 fitting labels after the validation "
                            "split, have " + std::to_string(n > n_val ? n - n_val : 0));
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> fit_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_rows.begin(), val_rows.end());
  std::sort(fit_rows.begin(), fit_rows.end());

  const auto labels = train.labels();
  std::vector<Label> fit_labels;
  for (auto r : fit_rows) fit_labels.push_back(labels[r]);

  const Eigen::Index d = train.dim();
  std::optional<Vector> mean;
  if (cfg.center_inputs) {
    Vector acc = Vector::Zero(d);
    for (auto r : fit_rows) acc += train.values().row(static_cast<Eigen::Index>(r)).transpose();
    mean = acc / static_cast<double>(fit_rows.size());
  }
  auto gather = [&](const std::vector<std::size_t>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = train.values().row(static_cast<Eigen::Index>(rows[i]));
    }
    return centered(out, mean);
  };

  const Matrix x_fit = gather(fit_rows);
  const Matrix x_val = gather(val_rows);
  const Matrix basis_fit = basis_rows(*basis, fit_labels);
  const Matrix basis_all = basis_rows(*basis, labels);
  std::vector<Eigen::Index> fit_targets(fit_rows.size());
  std::iota(fit_targets.begin(), fit_targets.end(), Eigen::Index{0});
  std::vector<Eigen::Index> val_targets;
  for (auto r : val_rows) val_targets.push_back(static_cast<Eigen::Index>(r));

  const Eigen::Index h = cfg.hidden_dim;
  const Eigen::Index k = basis->n_features();
  Matrix w_in(h, d);
  Matrix w_out(h, k);
  {
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double in_scale = 1.0 / std::sqrt(static_cast<double>(d));
    const double out_scale = 1.0 / std::sqrt(static_cast<double>(k));
    for (Eigen::Index i = 0; i < w_in.size(); ++i) w_in.data()[i] = gauss(rng) * in_scale;
    for (Eigen::Index i = 0; i < w_out.size(); ++i) w_out.data()[i] = gauss(rng) * out_scale;
  }

  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  adam_cfg.beta1 = cfg.beta1;
  adam_cfg.beta2 = cfg.beta2;
  adam_cfg.eps = cfg.eps;
  adam_cfg.weight_decay = cfg.weight_decay;
  adam_cfg.decoupled_weight_decay = cfg.decoupled_weight_decay;
  // Adam is elementwise, so one state per matrix equals one state over both.
  AdamState adam_in(static_cast<std::size_t>(w_in.size()), adam_cfg);
  AdamState adam_out(static_cast<std::size_t>(w_out.size()), adam_cfg);

  auto span_of = [](Matrix& m) { return std::span<double>(m.data(), static_cast<std::size_t>(m.size())); };

  BilinearKernel fit_kernel;
  BilinearKernel val_kernel;
  Matrix grad_in(h, d);
  Matrix grad_out(h, k);

  std::vector<EpochRecord> history;
  Matrix best_in = w_in;
  Matrix best_out = w_out;
  double best_val = val_kernel.loss(w_in, w_out, x_val, basis_all, val_targets);
  int best_epoch = 0;
  int stale = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double loss = fit_kernel.loss_and_grad(w_in, w_out, x_fit, basis_fit, fit_targets, grad_in, grad_out);
    if (cfg.regularization != Regularization::none) {
      loss += add_penalty(cfg.regularization, cfg.reg_lambda, span_of(w_in), span_of(grad_in));
      loss += add_penalty(cfg.regularization, cfg.reg_lambda, span_of(w_out), span_of(grad_out));
    }
    if (!std::isfinite(loss)) {
      throw TrainingError("training loss became non-finite at epoch " + std::to_string(epoch), epoch);
    }
    adam_step(span_of(w_in), span_of(grad_in), adam_in);
    adam_step(span_of(w_out), span_of(grad_out), adam_out);

    const double val = val_kernel.loss(w_in, w_out, x_val, basis_all, val_targets);
    if (!std::isfinite(val)) {
      throw TrainingError("validation loss became non-finite at epoch " + std::to_string(epoch), epoch);
    }
    history.push_back({epoch, loss, val});
    if (val < best_val) {
      best_val = val;
      best_in = w_in;
      best_out = w_out;
      best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }

  return ClassifierProbe(std::move(best_in), std::move(best_out), std::move(basis), cfg,
                         std::move(history), std::move(mean), best_epoch);
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

ClassifierDecode decode_classifier(const ClassifierProbe& p, const Eigen::Ref<const Vector>& x,
                                   std::span<const Label> candidates) {
  if (candidates.empty()) throw PreconditionError("decode_classifier: empty candidate set");
  const Vector s = p.scores(x, candidates);
  ClassifierDecode out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out.scores[candidates[i]] = s(static_cast<Eigen::Index>(i));
  }
  out.decoded = argmax_smallest(s.transpose(), candidates);
  return out;
}

std::vector<Label> decode_batch(const ClassifierProbe& p, const Matrix& inputs,
                                std::span<const Label> candidates) {
  if (candidates.empty()) throw PreconditionError("decode_batch: empty candidate set");
  if (inputs.cols() != p.input_dim()) throw PreconditionError("decode_batch: dimension mismatch");
  const Matrix logits =
      compute_logits(p.w_in(), p.w_out(), centered(inputs, p.input_mean()),
                     basis_rows(p.basis(), candidates));
  std::vector<Label> decoded(static_cast<std::size_t>(inputs.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    decoded[static_cast<std::size_t>(i)] = argmax_smallest(logits.row(i), candidates);
  }
  return decoded;
}

Matrix hidden_codes(const ClassifierProbe& p, const EmbeddingMatrix& m) {
  if (m.dim() != p.input_dim()) {
    throw PreconditionError("hidden_codes: embeddings have d=" + std::to_string(m.dim()) +
                            ", probe expects " + std::to_string(p.input_dim()));
  }
  Matrix out;
  out.noalias() = centered(m.values(), p.input_mean()) * p.w_in().transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

constexpr char kProbeMagic[8] = {'N', 'U', 'M', 'P', 'R', 'B', '0', '1'};

void write_container(const std::filesystem::path& path, const nlohmann::json& header,
                     const std::vector<double>& payload) {
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const auto len = static_cast<std::uint32_t>(text.size());
  out.write(kProbeMagic, 8);
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(double)));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

struct Container {
  nlohmann::json header;
  std::vector<double> payload;
};

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const std::string where = "'" + path.string() + "'";
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kProbeMagic, 8) != 0) {
    throw FormatError(where + ": field 'magic' is not NUMPRB01");
  }
  std::uint32_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof(len));
  if (12 + static_cast<std::size_t>(len) > bytes.size()) {
    throw FormatError(where + ": field 'header_length' exceeds file size");
  }
  Container c;
  try {
    c.header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + len);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(where + ": field 'header' is not valid JSON: " + e.what());
  }
  const std::size_t rest = bytes.size() - 12 - len;
  if (rest % sizeof(double) != 0) throw FormatError(where + ": payload is not a whole number of f64");
  c.payload.resize(rest / sizeof(double));
  std::memcpy(c.payload.data(), bytes.data() + 12 + len, rest);
  return c;
}

std::size_t expect_size(const Container& c, std::size_t wanted, const std::filesystem::path& path) {
  if (c.payload.size() != wanted) {
    throw FormatError("'" + path.string() + "': payload holds " + std::to_string(c.payload.size()) +
                      " values, header implies " + std::to_string(wanted));
  }
  return wanted;
}

}  // namespace

void save_probe(const ClassifierProbe& p, const std::filesystem::path& path) {
  const BasisMatrix& b = p.basis();
  nlohmann::json basis{{"kind", std::string(to_string(b.kind()))},
                       {"n_classes", b.n_classes()},
                       {"n_features", b.n_features()}};
  if (b.kind() == BasisKind::fourier) basis["periods"] = b.frequency_spec().periods;

  nlohmann::json history = nlohmann::json::array();
  for (const auto& r : p.train_history()) history.push_back({r.epoch, r.train_loss, r.val_loss});

  nlohmann::json header{{"kind", "classifier"},
                        {"h", p.hidden_dim()},
                        {"d", p.input_dim()},
                        {"k", b.n_features()},
                        {"basis", basis},
                        {"config", p.train_config()},
                        {"best_epoch", p.best_epoch()},
                        {"input_mean", p.input_mean().has_value()},
                        {"history", history}};

  std::vector<double> payload(p.w_in().data(), p.w_in().data() + p.w_in().size());
  payload.insert(payload.end(), p.w_out().data(), p.w_out().data() + p.w_out().size());
  if (p.input_mean()) {
    payload.insert(payload.end(), p.input_mean()->data(),
                   p.input_mean()->data() + p.input_mean()->size());
  }
  write_container(path, header, payload);
}

void save_probe(const RegressionProbe& p, const std::filesystem::path& path) {
  nlohmann::json header{{"kind", "regression"},
                        {"mode", std::string(to_string(p.mode))},
                        {"d", p.a.size()}};
  std::vector<double> payload(p.a.data(), p.a.data() + p.a.size());
  payload.push_back(p.b);
  write_container(path, header, payload);
}

std::string probe_file_kind(const std::filesystem::path& path) {
  return read_container(path).header.value("kind", std::string("unknown"));
}

ClassifierProbe load_classifier_probe(const std::filesystem::path& path) {
  const Container c = read_container(path);
  const auto& j = c.header;
  try {
    if (j.at("kind") != "classifier") {
      throw FormatError("'" + path.string() + "': field 'kind' is not classifier");
    }
    const auto h = j.at("h").get<Eigen::Index>();
    const auto d = j.at("d").get<Eigen::Index>();
    const auto k = j.at("k").get<Eigen::Index>();
    const bool has_mean = j.at("input_mean").get<bool>();
    expect_size(c, static_cast<std::size_t>(h * d + h * k + (has_mean ? d : 0)), path);

    const auto& jb = j.at("basis");
    std::shared_ptr<const BasisMatrix> basis;
    const int n_classes = jb.at("n_classes").get<int>();
    if (jb.at("kind") == "binary") {
      basis = std::make_shared<const BasisMatrix>(binary_basis(n_classes));
    } else if (jb.at("kind") == "fourier") {
      basis = std::make_shared<const BasisMatrix>(fourier_basis(
          n_classes, jb.at("n_features").get<int>(),
          FrequencySpec::from_periods(jb.at("periods").get<std::vector<double>>())));
    } else {
      throw FormatError("'" + path.string() + "': field 'basis.kind' is unknown");
    }
    if (basis->n_features() != k) {
      throw FormatError("'" + path.string() + "': field 'k' disagrees with the basis");
    }

    Matrix w_in = Eigen::Map<const Matrix>(c.payload.data(), h, d);
    Matrix w_out = Eigen::Map<const Matrix>(c.payload.data() + h * d, h, k);
    std::optional<Vector> mean;
    if (has_mean) mean = Eigen::Map<const Vector>(c.payload.data() + h * d + h * k, d);

    std::vector<EpochRecord> history;
    for (const auto& r : j.value("history", nlohmann::json::array())) {
      history.push_back({r.at(0).get<int>(), r.at(1).get<double>(), r.at(2).get<double>()});
    }
    return ClassifierProbe(std::move(w_in), std::move(w_out), std::move(basis),
                           j.at("config").get<TrainConfig>(), std::move(history), std::move(mean),
                           j.value("best_epoch", -1));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "': malformed probe header: " + e.what());
  }
}

RegressionProbe load_regression_probe(const std::filesystem::path& path) {
  const Container c = read_container(path);
  const auto& j = c.header;
  try {
    if (j.at("kind") != "regression") {
      throw FormatError("'" + path.string() + "': field 'kind' is not regression");
    }
    const auto d = j.at("d").get<Eigen::Index>();
    expect_size(c, static_cast<std::size_t>(d + 1), path);
    RegressionProbe p;
    p.a = Eigen::Map<const Vector>(c.payload.data(), d);
    p.b = c.payload.back();
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "linear") {
      p.mode = RegressionMode::linear;
    } else if (mode == "loglinear") {
      p.mode = RegressionMode::loglinear;
    } else {
      throw FormatError("'" + path.string() + "': field 'mode' is unknown");
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "': malformed probe header: " + e.what());
  }
}

}  // namespace numprobe
