// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#include "numprobe/crossval.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "numprobe/error.hpp"
#include "parallel.hpp"

namespace numprobe {

namespace {

constexpr int kMaxBasisClasses = 10'000'000;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined word.
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string join(const std::vector<Label>& labels) {
  std::ostringstream os;
  for (std::size_t i = 0; i < labels.size(); ++i) os << (i ? ", " : "") << labels[i];
  return os.str();
}

}  // namespace

std::string_view to_string(ProbeKind kind) {
  switch (kind) {
    case ProbeKind::lin: return "lin";
    case ProbeKind::loglin: return "loglin";
    case ProbeKind::sin: return "sin";
    default: return "bin";
  }
}

ProbeKind parse_probe_kind(std::string_view text) {
  if (text == "lin") return ProbeKind::lin;
  if (text == "loglin") return ProbeKind::loglin;
  if (text == "sin") return ProbeKind::sin;
  if (text == "bin") return ProbeKind::bin;
  throw PreconditionError("unknown probe kind '" + std::string(text) + "'");
}

bool is_classifier(ProbeKind kind) { return kind == ProbeKind::sin || kind == ProbeKind::bin; }

void to_json(nlohmann::json& j, const ProbeSpec& s) {
  j = nlohmann::json{{"kind", std::string(to_string(s.kind))}};
  if (is_classifier(s.kind)) {
    j["train"] = s.train;
    if (s.kind == ProbeKind::sin) {
      j["frequencies"] = s.frequencies.to_string();
      j["fourier_features"] = s.fourier_features;
    }
  } else {
    j["fit"] = "least_squares";
  }
}

void from_json(const nlohmann::json& j, ProbeSpec& s) {
  s = ProbeSpec{};
  s.kind = parse_probe_kind(j.at("kind").get<std::string>());
  if (j.contains("train")) s.train = j.at("train").get<TrainConfig>();
  if (j.contains("frequencies")) s.frequencies = FrequencySpec::parse(j.at("frequencies").get<std::string>());
  s.fourier_features = j.value("fourier_features", kDefaultFourierFeatures);
}

std::shared_ptr<const BasisMatrix> make_basis(const ProbeSpec& spec, int n_classes) {
  switch (spec.kind) {
    case ProbeKind::sin:
      return std::make_shared<const BasisMatrix>(
          fourier_basis(n_classes, spec.fourier_features, spec.frequencies));
    case ProbeKind::bin:
      return std::make_shared<const BasisMatrix>(binary_basis(n_classes));
    default:
      throw PreconditionError("regression probes have no basis");
  }
}

void to_json(nlohmann::json& j, const CVReport& r) {
  nlohmann::json tokens = nlohmann::json::array();
  for (const auto& t : r.per_token) {
    tokens.push_back({{"label", t.label}, {"fold", t.fold}, {"decoded", t.decoded}, {"correct", t.correct}});
  }
  j = nlohmann::json{{"probe_kind", std::string(to_string(r.probe_kind))},
                     {"fold_count", r.fold_count},
                     {"per_fold_accuracy", r.per_fold_accuracy},
                     {"mean_accuracy", r.mean_accuracy},
                     {"config", r.spec},
                     {"seed", r.seed},
                     {"model", r.model_name},
                     {"control", r.control},
                     {"per_token", tokens}};
}

void from_json(const nlohmann::json& j, CVReport& r) {
  r.probe_kind = parse_probe_kind(j.at("probe_kind").get<std::string>());
  r.fold_count = j.at("fold_count").get<int>();
  r.per_fold_accuracy = j.at("per_fold_accuracy").get<std::vector<double>>();
  r.mean_accuracy = j.at("mean_accuracy").get<double>();
  r.spec = j.at("config").get<ProbeSpec>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.model_name = j.value("model", std::string());
  r.control = j.value("control", std::string("none"));
  r.per_token.clear();
  for (const auto& t : j.at("per_token")) {
    r.per_token.push_back({t.at("label").get<Label>(), t.at("fold").get<int>(),
                           t.at("decoded").get<Label>(), t.at("correct").get<bool>()});
  }
}

void write_token_csv(const CVReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "label,fold,decoded,correct\n";
  for (const auto& t : r.per_token) {
    out << t.label << ',' << t.fold << ',' << t.decoded << ',' << (t.correct ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::vector<std::vector<Label>> fold_partition(std::span<const Label> labels, int folds,
                                               std::uint64_t seed) {
  if (folds < 2) throw PreconditionError("cross-validation needs at least 2 folds");
  if (labels.size() < static_cast<std::size_t>(folds)) {
    throw PreconditionError("cannot split " + std::to_string(labels.size()) + " labels into " +
                            std::to_string(folds) + " non-empty folds");
  }
  std::vector<Label> shuffled(labels.begin(), labels.end());
  std::mt19937_64 rng(seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  std::vector<std::vector<Label>> out(static_cast<std::size_t>(folds));
  const std::size_t base = shuffled.size() / static_cast<std::size_t>(folds);
  const std::size_t extra = shuffled.size() % static_cast<std::size_t>(folds);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < out.size(); ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    out[f].assign(shuffled.begin() + static_cast<std::ptrdiff_t>(pos),
                  shuffled.begin() + static_cast<std::ptrdiff_t>(pos + size));
    std::sort(out[f].begin(), out[f].end());
    pos += size;
  }
  return out;
}

CVReport cross_validate(const EmbeddingMatrix& m, const ProbeSpec& spec, int folds,
                        std::uint64_t seed, int threads) {
  const auto partition = fold_partition(m.labels(), folds, seed);
  for (const auto& f : partition) {
    if (f.empty()) throw PreconditionError("a fold has no test rows");
  }

  std::shared_ptr<const BasisMatrix> basis;
  if (is_classifier(spec.kind)) {
    spec.train.validate();
    if (m.max_label() >= kMaxBasisClasses) {
      throw PreconditionError("labels up to " + std::to_string(m.max_label()) +
                              " need a basis too large to build");
    }
    basis = make_basis(spec, static_cast<int>(m.max_label() + 1));
  }

  const std::vector<Label> candidates(m.labels().begin(), m.labels().end());
  std::vector<std::vector<TokenOutcome>> outcomes(partition.size());

  detail::parallel_for(partition.size(), threads, [&](std::size_t f) {
    const auto& test = partition[f];
    std::vector<Label> train_labels;
    train_labels.reserve(candidates.size() - test.size());
    std::set_difference(candidates.begin(), candidates.end(), test.begin(), test.end(),
                        std::back_inserter(train_labels));
    const EmbeddingMatrix train = m.subset(train_labels);
    const EmbeddingMatrix held_out = m.subset(test);

    std::vector<Label> decoded(test.size());
    if (is_classifier(spec.kind)) {
      TrainConfig cfg = spec.train;
      cfg.seed = mix_seed(spec.train.seed, mix_seed(seed, f));
      const ClassifierProbe probe = train_classifier(train, basis, cfg);
      decoded = decode_batch(probe, held_out.values(), candidates);
    } else {
      const auto mode =
          spec.kind == ProbeKind::lin ? RegressionMode::linear : RegressionMode::loglinear;
      const RegressionProbe probe = fit_regression(train, mode);
      for (std::size_t i = 0; i < test.size(); ++i) {
        decoded[i] =
            predict_regression(probe, held_out.values().row(static_cast<Eigen::Index>(i)).transpose())
                .decoded;
      }
    }
    for (std::size_t i = 0; i < test.size(); ++i) {
      outcomes[f].push_back({test[i], static_cast<int>(f), decoded[i], decoded[i] == test[i]});
    }
  });

  CVReport report;
  report.probe_kind = spec.kind;
  report.fold_count = folds;
  report.spec = spec;
  report.seed = seed;
  report.model_name = m.model_name();
  for (const auto& fold : outcomes) {
    const auto correct = std::count_if(fold.begin(), fold.end(), [](const auto& t) { return t.correct; });
    report.per_fold_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(fold.size()));
    report.per_token.insert(report.per_token.end(), fold.begin(), fold.end());
  }
  report.mean_accuracy = std::accumulate(report.per_fold_accuracy.begin(),
                                         report.per_fold_accuracy.end(), 0.0) /
                         static_cast<double>(report.per_fold_accuracy.size());
  std::sort(report.per_token.begin(), report.per_token.end(),
            [](const auto& a, const auto& b) { return a.label < b.label; });
  return report;
}

CVReport control_gaussian(const EmbeddingMatrix& m, const ProbeSpec& spec, int folds,
                          std::uint64_t seed, int threads) {
  std::mt19937_64 rng(mix_seed(seed, 0x6761757373ULL));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix values(m.rows(), m.dim());
  for (Eigen::Index i = 0; i < values.size(); ++i) values.data()[i] = gauss(rng);
  CVReport r = cross_validate(m.with_values(std::move(values)), spec, folds, seed, threads);
  r.control = "gaussian";
  return r;
}

std::vector<Label> control_permutation_labels(std::span<const Label> labels, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x7065726DULL));
  std::vector<Label> permuted(labels.begin(), labels.end());
  const auto allowed_fixed = static_cast<std::size_t>(0.01 * static_cast<double>(labels.size()));
  for (int attempt = 0; attempt < 10'000; ++attempt) {
    std::shuffle(permuted.begin(), permuted.end(), rng);
    std::size_t fixed = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) fixed += permuted[i] == labels[i];
    if (fixed <= allowed_fixed) return permuted;
  }
  throw PreconditionError("could not draw a permutation with at most 1% fixed points");
}

CVReport control_permutation(const EmbeddingMatrix& m, const ProbeSpec& spec, int folds,
                             std::uint64_t seed, int threads) {
  CVReport r = cross_validate(m.with_labels(control_permutation_labels(m.labels(), seed)), spec,
                              folds, seed, threads);
  r.control = "permutation";
  return r;
}

std::vector<Label> DecodabilityTable::undecodable() const {
  std::vector<Label> out;
  for (const auto& [label, ok] : entries) {
    if (!ok) out.push_back(label);
  }
  return out;
}

std::size_t DecodabilityTable::decodable_count() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.second; }));
}

void to_json(nlohmann::json& j, const DecodabilityTable& t) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [label, ok] : t.entries) entries.push_back({{"label", label}, {"decodable", ok}});
  j = nlohmann::json{{"probe_kind", std::string(to_string(t.probe_kind))},
                     {"model", t.model_name},
                     {"decodable_count", t.decodable_count()},
                     {"undecodable", t.undecodable()},
                     {"entries", entries}};
}

DecodabilityTable decodability_table(std::span<const CVReport> reports, ProbeKind kind,
                                     std::span<const Label> expected_labels) {
  DecodabilityTable table;
  table.probe_kind = kind;
  std::vector<std::pair<Label, bool>> seen;
  for (const auto& r : reports) {
    if (r.probe_kind != kind) continue;
    if (table.model_name.empty()) table.model_name = r.model_name;
    for (const auto& t : r.per_token) seen.emplace_back(t.label, t.correct);
  }
  std::sort(seen.begin(), seen.end());

  std::vector<Label> twice;
  for (std::size_t i = 1; i < seen.size(); ++i) {
    if (seen[i].first == seen[i - 1].first &&
        (twice.empty() || twice.back() != seen[i].first)) {
      twice.push_back(seen[i].first);
    }
  }
  if (!twice.empty()) throw DataError("labels covered by more than one test fold: " + join(twice));

  std::vector<Label> expected(expected_labels.begin(), expected_labels.end());
  std::sort(expected.begin(), expected.end());
  std::vector<Label> missing;
  for (Label l : expected) {
    auto it = std::lower_bound(seen.begin(), seen.end(), std::make_pair(l, false));
    if (it == seen.end() || it->first != l) {
      missing.push_back(l);
    } else {
      table.entries.push_back(*it);
    }
  }
  if (!missing.empty()) {
    throw DataError("decodability reports do not cover labels: " + join(missing));
  }
  return table;
}

}  // namespace numprobe
