// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#include "numprobe_cli/commands.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>

#include "numprobe/error.hpp"
#include "numprobe/probes.hpp"

#ifndef NUMPROBE_VERSION
#define NUMPROBE_VERSION "0.0.0"
#endif

namespace numprobe::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view toolkit_version() { return NUMPROBE_VERSION; }

namespace {

std::vector<FileDigest> embedding_digests(const std::string& path) {
  if (detect_format(path) == FileFormat::npy_pair) {
    const auto v = npy::values_path(path);
    const auto l = npy::labels_path(path);
    return {{v.string(), sha256_file(v)}, {l.string(), sha256_file(l)}};
  }
  return {{path, sha256_file(path)}};
}

EmbeddingMatrix load_input(const std::string& path) { return load_embeddings(path, detect_format(path)); }

/// Collects output names and stamps the manifest once a command is done.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  fs::path operator()(const std::string& name) {
    names_.push_back(name);
    return dir_ / name;
  }

  RunManifest finish(std::string command, json config, std::uint64_t seed,
                     std::vector<FileDigest> inputs) const {
    RunManifest m;
    m.command = std::move(command);
    m.config = std::move(config);
    m.seed = seed;
    m.version = std::string(toolkit_version());
    m.inputs = std::move(inputs);
    for (const auto& n : names_) m.outputs.push_back({n, sha256_file(dir_ / n)});
    write_manifest(m, dir_);
    return m;
  }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

ProbeSpec spec_of(const ClassifierProbe& p) {
  ProbeSpec spec;
  spec.kind = p.basis().kind() == BasisKind::fourier ? ProbeKind::sin : ProbeKind::bin;
  spec.train = p.train_config();
  if (spec.kind == ProbeKind::sin) {
    spec.frequencies = p.basis().frequency_spec();
    spec.fourier_features = p.basis().n_features();
  }
  return spec;
}

double accuracy(std::span<const Label> truth, std::span<const Label> decoded) {
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == decoded[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::vector<Label> decode_rows(const EmbeddingMatrix& rows, const ClassifierProbe* cls,
                               const RegressionProbe* reg, std::span<const Label> candidates) {
  if (cls) return decode_batch(*cls, rows.values(), candidates);
  std::vector<Label> out;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    out.push_back(predict_regression(*reg, rows.values().row(i).transpose()).decoded);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// config snapshots

json to_config(const SynthOptions& o) {
  return {{"kind", to_string(o.spec.kind)},
          {"n", o.spec.n},
          {"d", o.spec.d},
          {"noise_sigma", o.spec.noise_sigma},
          {"seed", o.spec.seed},
          {"helix_periods", o.spec.helix_periods},
          {"scale", o.spec.scale},
          {"format", to_string(o.format)},
          {"dtype", to_string(o.dtype)}};
}

SynthOptions synth_from_config(const json& j) {
  SynthOptions o;
  o.spec.kind = parse_synth_kind(j.at("kind").get<std::string>());
  o.spec.n = j.at("n").get<int>();
  o.spec.d = j.at("d").get<int>();
  o.spec.noise_sigma = j.at("noise_sigma").get<double>();
  o.spec.seed = j.at("seed").get<std::uint64_t>();
  o.spec.helix_periods = j.at("helix_periods").get<std::vector<double>>();
  o.spec.scale = j.at("scale").get<double>();
  o.format = parse_file_format(j.at("format").get<std::string>());
  o.dtype = parse_dtype(j.at("dtype").get<std::string>());
  return o;
}

json to_config(const ProbeOptions& o) {
  return {{"embeddings", o.embeddings}, {"probe", o.spec}, {"folds", o.folds}, {"seed", o.seed}};
}

ProbeOptions probe_from_config(const json& j) {
  ProbeOptions o;
  o.embeddings = j.at("embeddings").get<std::string>();
  o.spec = j.at("probe").get<ProbeSpec>();
  o.folds = j.at("folds").get<int>();
  o.seed = j.at("seed").get<std::uint64_t>();
  return o;
}

json to_config(const AnalyzeOptions& o) {
  return {{"embeddings", o.embeddings},
          {"pca_dims", o.pca_dims},
          {"spectrum", o.spectrum},
          {"spectrum_dims", o.spectrum_dims},
          {"probe_file", o.probe_file.empty() ? json() : json(o.probe_file)}};
}

AnalyzeOptions analyze_from_config(const json& j) {
  AnalyzeOptions o;
  o.embeddings = j.at("embeddings").get<std::string>();
  o.pca_dims = j.at("pca_dims").get<int>();
  o.spectrum = j.at("spectrum").get<bool>();
  o.spectrum_dims = j.at("spectrum_dims").get<int>();
  if (!j.at("probe_file").is_null()) o.probe_file = j.at("probe_file").get<std::string>();
  return o;
}

json to_config(const TrainOptions& o) {
  return {{"embeddings", o.embeddings}, {"probe", o.spec}, {"exclude", o.exclude}};
}

TrainOptions train_from_config(const json& j) {
  TrainOptions o;
  o.embeddings = j.at("embeddings").get<std::string>();
  o.spec = j.at("probe").get<ProbeSpec>();
  o.exclude = j.at("exclude").get<std::vector<Label>>();
  return o;
}

json to_config(const RepairOptions& o) {
  return {{"embeddings", o.embeddings},
          {"probe_file", o.probe_file},
          {"targets", o.targets ? json(*o.targets) : json("auto")},
          {"repair", o.repair},
          {"folds", o.folds},
          {"seed", o.seed}};
}

RepairOptions repair_from_config(const json& j) {
  RepairOptions o;
  o.embeddings = j.at("embeddings").get<std::string>();
  o.probe_file = j.at("probe_file").get<std::string>();
  if (j.at("targets").is_array()) o.targets = j.at("targets").get<std::vector<Label>>();
  const json& r = j.at("repair");
  o.repair.lr = r.at("lr").get<double>();
  o.repair.max_steps = r.at("max_steps").get<int>();
  o.repair.margin = r.at("margin").get<double>();
  if (!r.at("max_displacement").is_null()) o.repair.max_displacement = r.at("max_displacement").get<double>();
  o.repair.seed = r.at("seed").get<std::uint64_t>();
  o.folds = j.at("folds").get<int>();
  o.seed = j.at("seed").get<std::uint64_t>();
  return o;
}

// ---------------------------------------------------------------------------
// commands

RunManifest run_synth(const SynthOptions& o, const fs::path& out_dir, std::ostream& log) {
  o.spec.validate();
  const EmbeddingMatrix m = generate(o.spec);
  OutputSet out(out_dir);
  const std::string stem = o.format == FileFormat::emb1 ? "embeddings.emb" : "embeddings";
  const SaveInfo info = save_embeddings(m, out_dir / stem, o.format, o.dtype);
  for (const auto& f : info.files) out(f.filename().string());
  log << "synth: " << to_string(o.spec.kind) << " N=" << m.rows() << " d=" << m.dim() << " -> "
      << (out_dir / stem).string() << (info.lossy ? " (narrowed to f32)" : "") << '\n';
  return out.finish("synth", to_config(o), o.spec.seed, {});
}

RunManifest run_probe(const ProbeOptions& o, const fs::path& out_dir, int threads, std::ostream& log) {
  const EmbeddingMatrix m = load_input(o.embeddings);
  auto inputs = embedding_digests(o.embeddings);
  const CVReport report = cross_validate(m, o.spec, o.folds, o.seed, threads);
  const DecodabilityTable table = decodability_table({&report, 1}, report.probe_kind, m.labels());

  OutputSet out(out_dir);
  write_json(report, out("cv_report.json"));
  write_token_csv(report, out("cv_tokens.csv"));
  write_json(table, out("decodability.json"));
  log << to_string(o.spec.kind) << ": mean accuracy " << report.mean_accuracy << " over " << report.fold_count
      << " folds, " << table.undecodable().size() << " of " << m.rows() << " tokens undecodable\n";
  return out.finish("probe", to_config(o), o.seed, std::move(inputs));
}

RunManifest run_controls(const ProbeOptions& o, const fs::path& out_dir, int threads, std::ostream& log) {
  const EmbeddingMatrix m = load_input(o.embeddings);
  auto inputs = embedding_digests(o.embeddings);
  const CVReport gauss = control_gaussian(m, o.spec, o.folds, o.seed, threads);
  const CVReport perm = control_permutation(m, o.spec, o.folds, o.seed, threads);

  OutputSet out(out_dir);
  write_json(gauss, out("control_gaussian.json"));
  write_token_csv(gauss, out("control_gaussian.csv"));
  write_json(perm, out("control_permutation.json"));
  write_token_csv(perm, out("control_permutation.csv"));
  log << to_string(o.spec.kind) << ": gaussian control " << gauss.mean_accuracy << ", permutation control "
      << perm.mean_accuracy << " (chance " << 1.0 / static_cast<double>(m.rows()) << ")\n";
  return out.finish("controls", to_config(o), o.seed, std::move(inputs));
}

RunManifest run_analyze(const AnalyzeOptions& o, const fs::path& out_dir, std::ostream& log) {
  const EmbeddingMatrix m = load_input(o.embeddings);
  auto inputs = embedding_digests(o.embeddings);
  OutputSet out(out_dir);

  const PCAResult p = pca(m, o.pca_dims);
  write_pca_csv(p, out("pca.csv"));
  write_json({{"n_components", p.components.rows()},
              {"explained_variance", p.explained_variance},
              {"explained_variance_ratio", p.explained_variance_ratio()},
              {"total_variance", p.total_variance}},
             out("pca.json"));
  log << "pca: " << p.components.rows() << " components\n";

  if (o.spectrum) {
    const auto c = static_cast<int>(std::min<Eigen::Index>({o.spectrum_dims, m.rows(), m.dim()}));
    const SpectrumReport s = fourier_spectrum(pca(m, c));
    write_spectrum_csv(s, out("spectrum.csv"));
    write_json({{"component_count", s.component_count},
                {"n_samples", s.n_samples},
                {"sparsity", s.sparsity},
                {"normalization", s.normalization}},
               out("spectrum.json"));
    log << "spectrum: " << c << " components, sparsity " << s.sparsity << '\n';
  }

  if (!o.probe_file.empty()) {
    inputs.push_back({o.probe_file, sha256_file(o.probe_file)});
    const ClassifierProbe probe = load_classifier_probe(o.probe_file);
    dump_hidden_waves(probe, m, out("waves.csv"));
    const Matrix codes = hidden_codes(probe, m);
    std::vector<double> shares;
    for (Eigen::Index u = 0; u < codes.cols(); ++u) {
      const Vector col = codes.col(u);
      shares.push_back(dominant_bin_share({col.data(), static_cast<std::size_t>(col.size())}));
    }
    const auto best = std::max_element(shares.begin(), shares.end());
    write_json({{"dominant_bin_share", shares},
                {"best_unit", best - shares.begin()},
                {"best_share", *best}},
               out("waves.json"));
    log << "waves: " << codes.cols() << " hidden units, best dominant-bin share " << *best << '\n';
  }
  return out.finish("analyze", to_config(o), 0, std::move(inputs));
}

RunManifest run_train(const TrainOptions& o, const fs::path& out_dir, std::ostream& log) {
  const EmbeddingMatrix m = load_input(o.embeddings);
  auto inputs = embedding_digests(o.embeddings);

  std::vector<Label> exclude = o.exclude;
  std::sort(exclude.begin(), exclude.end());
  exclude.erase(std::unique(exclude.begin(), exclude.end()), exclude.end());
  std::vector<Label> keep;
  std::vector<Label> held;
  for (Label l : m.labels()) {
    (std::binary_search(exclude.begin(), exclude.end(), l) ? held : keep).push_back(l);
  }
  if (held.size() != exclude.size()) throw PreconditionError("--exclude lists labels that are not in the embeddings");
  const EmbeddingMatrix train = m.subset(keep);

  OutputSet out(out_dir);
  std::optional<ClassifierProbe> cls;
  std::optional<RegressionProbe> reg;
  json summary{{"probe", o.spec}, {"train_rows", train.rows()}, {"excluded", held}};
  if (is_classifier(o.spec.kind)) {
    const int n_classes = static_cast<int>(m.max_label()) + 1;
    cls = train_classifier(train, make_basis(o.spec, n_classes), o.spec.train);
    save_probe(*cls, out("probe.bin"));
    summary["best_epoch"] = cls->best_epoch();
    summary["epochs_run"] = cls->train_history().size();
    std::string csv = "epoch,train_loss,val_loss\n";
    for (const auto& e : cls->train_history()) {
      csv += std::to_string(e.epoch) + ',' + json(e.train_loss).dump() + ',' + json(e.val_loss).dump() + '\n';
    }
    write_text(out("train_history.csv"), csv);
  } else {
    const auto mode = o.spec.kind == ProbeKind::lin ? RegressionMode::linear : RegressionMode::loglinear;
    reg = fit_regression(train, mode);
    save_probe(*reg, out("probe.bin"));
  }

  const ClassifierProbe* c = cls ? &*cls : nullptr;
  const RegressionProbe* r = reg ? &*reg : nullptr;
  const double train_acc = accuracy(train.labels(), decode_rows(train, c, r, m.labels()));
  summary["train_accuracy"] = train_acc;
  if (!held.empty()) {
    const EmbeddingMatrix rest = m.subset(held);
    summary["excluded_accuracy"] = accuracy(rest.labels(), decode_rows(rest, c, r, m.labels()));
  }
  write_json(summary, out("train_report.json"));
  log << to_string(o.spec.kind) << ": train accuracy " << train_acc << " on " << train.rows() << " tokens\n";
  return out.finish("train", to_config(o), o.spec.train.seed, std::move(inputs));
}

RunManifest run_repair(const RepairOptions& o, const fs::path& out_dir, int threads, std::ostream& log) {
  o.repair.validate();
  const EmbeddingMatrix m = load_input(o.embeddings);
  auto inputs = embedding_digests(o.embeddings);
  inputs.push_back({o.probe_file, sha256_file(o.probe_file)});
  if (probe_file_kind(o.probe_file) != "classifier") {
    throw PreconditionError("repair needs a classifier (sin or bin) probe file");
  }
  const ClassifierProbe probe = load_classifier_probe(o.probe_file);

  OutputSet out(out_dir);
  std::vector<Label> targets;
  if (o.targets) {
    targets = *o.targets;
  } else {
    const CVReport report = cross_validate(m, spec_of(probe), o.folds, o.seed, threads);
    const DecodabilityTable table = decodability_table({&report, 1}, report.probe_kind, m.labels());
    targets = table.undecodable();
    write_json(report, out("cv_report.json"));
    write_json(table, out("decodability.json"));
    log << "auto targets: " << targets.size() << " undecodable tokens (cv accuracy " << report.mean_accuracy
        << ")\n";
  }

  const RepairResult result = repair_embeddings(m, probe, targets, o.repair, threads);
  save_embeddings(result.repaired, out("repaired.emb"), FileFormat::emb1, DType::f64);
  write_json(result.report, out("repair_report.json"));
  std::string csv = "label,l2,cosine_delta\n";
  for (const auto& d : repair_diff(m, result.repaired)) {
    if (d.l2 == 0.0) continue;
    csv += std::to_string(d.label) + ',' + json(d.l2).dump() + ',' + json(d.cosine_delta).dump() + '\n';
  }
  write_text(out("repair_diff.csv"), csv);

  const auto ok = std::count_if(result.report.tokens.begin(), result.report.tokens.end(),
                                [](const auto& t) { return t.success; });
  log << "repair: " << ok << " of " << result.report.tokens.size() << " targets decode with margin "
      << o.repair.margin << '\n';
  return out.finish("repair", to_config(o), o.seed, std::move(inputs));
}

RunManifest run_from_manifest(const RunManifest& m, const fs::path& out_dir, int threads, std::ostream& log) {
  for (const auto& in : m.inputs) {
    if (!fs::exists(in.path)) throw PreconditionError("recorded input " + in.path + " no longer exists");
    if (sha256_file(in.path) != in.sha256) throw PreconditionError("recorded input " + in.path + " has changed");
  }
  if (m.command == "synth") return run_synth(synth_from_config(m.config), out_dir, log);
  if (m.command == "probe") return run_probe(probe_from_config(m.config), out_dir, threads, log);
  if (m.command == "controls") return run_controls(probe_from_config(m.config), out_dir, threads, log);
  if (m.command == "analyze") return run_analyze(analyze_from_config(m.config), out_dir, log);
  if (m.command == "train") return run_train(train_from_config(m.config), out_dir, log);
  if (m.command == "repair") return run_repair(repair_from_config(m.config), out_dir, threads, log);
  throw PreconditionError("manifest names unknown command '" + m.command + "'");
}

}  // namespace numprobe::cli
