// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <ostream>
#include <thread>

#include <CLI11.hpp>

#include "numprobe/embstore.hpp"
#include "numprobe/error.hpp"
#include "numprobe_cli/commands.hpp"

namespace numprobe::cli {

namespace fs = std::filesystem;

namespace {

std::string absolute_input(const std::string& path) {
  if (path.empty()) return path;
  return fs::absolute(path).lexically_normal().string();
}

std::vector<Label> parse_label_list(const std::string& text) {
  std::vector<Label> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find(',', pos), text.size());
    const std::string_view item(text.data() + pos, end - pos);
    Label v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      throw PreconditionError("cannot parse label '" + std::string(item) + "' in list '" + text + "'");
    }
    out.push_back(v);
    pos = end + 1;
  }
  return out;
}

std::vector<double> parse_period_list(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find(',', pos), text.size());
    const std::string_view item(text.data() + pos, end - pos);
    double v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      throw PreconditionError("cannot parse period '" + std::string(item) + "'");
    }
    out.push_back(v);
    pos = end + 1;
  }
  return out;
}

const std::vector<std::string> kProbeNames{"lin", "loglin", "sin", "bin"};

struct ProbeFlags {
  std::string kind;
  std::string basis = "default";
  std::string reg = "none";
  bool coupled = false;
  ProbeSpec spec;

  void add(CLI::App* sub) {
    TrainConfig& t = spec.train;
    sub->add_option("--probe", kind, "Probe architecture")->required()->check(CLI::IsMember(kProbeNames));
    sub->add_option("--basis", basis, "Fourier periods: 'default' or a comma-separated list")
        ->capture_default_str();
    sub->add_option("--features", spec.fourier_features, "Fourier basis width k (even)")->capture_default_str();
    sub->add_option("--lr", t.lr, "Adam learning rate")->capture_default_str();
    sub->add_option("--weight-decay", t.weight_decay, "Adam weight decay")->capture_default_str();
    sub->add_flag("--coupled-weight-decay", coupled, "Add weight decay to the gradient instead of decoupling it");
    sub->add_option("--hidden", t.hidden_dim, "Hidden width h")->capture_default_str();
    sub->add_option("--reg", reg, "Extra penalty on W_in and W_out")
        ->check(CLI::IsMember({"none", "l1", "l2"}))
        ->capture_default_str();
    sub->add_option("--reg-lambda", t.reg_lambda, "Penalty strength")->capture_default_str();
    sub->add_option("--max-epochs", t.max_epochs)->capture_default_str();
    sub->add_option("--patience", t.patience, "Early-stopping patience in epochs")->capture_default_str();
    sub->add_option("--val-fraction", t.val_fraction)->capture_default_str();
    sub->add_option("--train-seed", t.seed, "Seed of initialisation and validation split")->capture_default_str();
    sub->add_flag("--center", t.center_inputs, "Centre inputs on the training mean");
  }

  ProbeSpec resolve() {
    spec.kind = parse_probe_kind(kind);
    spec.frequencies = FrequencySpec::parse(basis);
    spec.train.regularization = parse_regularization(reg);
    spec.train.decoupled_weight_decay = !coupled;
    spec.train.validate();
    return spec;
  }
};

const CLI::Validator kEmbeddingsInput(
    [](std::string& path) -> std::string {
      if (std::filesystem::is_regular_file(path) || std::filesystem::is_regular_file(npy::values_path(path))) {
        return {};
      }
      return "no EMB1 file or NPY pair at '" + path + "'";
    },
    "PATH", "EMBEDDINGS");

int default_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Decode integers from number embeddings", "numprobe"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(toolkit_version()));

  std::string out_dir;
  int threads = default_threads();
  auto common = [&](CLI::App* sub, bool parallel) {
    sub->add_option("--out", out_dir, "Output directory")->required();
    if (parallel) sub->add_option("--threads", threads, "Worker threads for folds and tokens")->check(CLI::PositiveNumber);
  };

  // synth
  SynthOptions synth;
  std::string synth_kind = "helix", synth_periods = "2,5,10,100,1000", synth_format = "emb1", synth_dtype = "f64";
  auto* s = app.add_subcommand("synth", "Generate seeded synthetic embeddings");
  s->add_option("--kind", synth_kind)->check(CLI::IsMember({"linear", "loglinear", "helix", "gaussian"}))->capture_default_str();
  s->add_option("--n", synth.spec.n, "Number of tokens")->capture_default_str();
  s->add_option("--d", synth.spec.d, "Embedding dimension")->capture_default_str();
  s->add_option("--noise", synth.spec.noise_sigma, "Gaussian noise sigma")->capture_default_str();
  s->add_option("--seed", synth.spec.seed)->capture_default_str();
  s->add_option("--periods", synth_periods, "Helix periods, comma-separated")->capture_default_str();
  s->add_option("--scale", synth.spec.scale)->capture_default_str();
  s->add_option("--format", synth_format)->check(CLI::IsMember({"emb1", "npy_pair"}))->capture_default_str();
  s->add_option("--dtype", synth_dtype)->check(CLI::IsMember({"f32", "f64"}))->capture_default_str();
  common(s, false);

  // probe / controls
  ProbeOptions probe;
  ProbeFlags probe_flags;
  auto add_cv = [&](CLI::App* sub) {
    sub->add_option("--embeddings", probe.embeddings, "EMB1 file or NPY-pair stem")->required()->check(kEmbeddingsInput);
    sub->add_option("--folds", probe.folds)->capture_default_str();
    sub->add_option("--seed", probe.seed, "Fold-assignment seed")->capture_default_str();
    probe_flags.add(sub);
    common(sub, true);
  };
  auto* p = app.add_subcommand("probe", "Cross-validate one probe");
  add_cv(p);
  auto* c = app.add_subcommand("controls", "Gaussian and label-permutation control runs");
  add_cv(c);

  // analyze
  AnalyzeOptions analyze;
  auto* a = app.add_subcommand("analyze", "PCA, Fourier spectrum and hidden-wave dumps");
  a->add_option("--embeddings", analyze.embeddings)->required()->check(kEmbeddingsInput);
  a->add_option("--pca-dims", analyze.pca_dims)->capture_default_str();
  a->add_flag("--spectrum", analyze.spectrum, "Also write the Fourier spectrum of the PCA components");
  a->add_option("--spectrum-dims", analyze.spectrum_dims)->capture_default_str();
  a->add_option("--probe-file", analyze.probe_file, "Classifier probe whose hidden codes are dumped")->check(CLI::ExistingFile);
  common(a, false);

  // train
  TrainOptions train;
  ProbeFlags train_flags;
  std::string exclude_text;
  auto* t = app.add_subcommand("train", "Fit one probe on all tokens and save it");
  t->add_option("--embeddings", train.embeddings)->required()->check(kEmbeddingsInput);
  t->add_option("--exclude", exclude_text, "Comma-separated labels left out of training");
  train_flags.add(t);
  common(t, false);

  // repair
  RepairOptions repair;
  std::string targets_text;
  double max_disp = 0.0;
  auto* r = app.add_subcommand("repair", "Move embeddings until a frozen probe decodes them");
  r->add_option("--embeddings", repair.embeddings)->required()->check(kEmbeddingsInput);
  r->add_option("--probe-file", repair.probe_file)->required()->check(CLI::ExistingFile);
  r->add_option("--targets", targets_text, "Comma-separated labels, or 'auto'")->required();
  r->add_option("--lr", repair.repair.lr)->capture_default_str();
  r->add_option("--max-steps", repair.repair.max_steps)->capture_default_str();
  r->add_option("--margin", repair.repair.margin, "Required logit margin")->capture_default_str();
  auto* max_disp_opt = r->add_option("--max-displacement", max_disp, "L2 radius around the original row");
  r->add_option("--folds", repair.folds, "Folds of the cross-validation behind --targets auto")->capture_default_str();
  r->add_option("--seed", repair.seed, "Fold seed for --targets auto")->capture_default_str();
  common(r, true);

  // replay
  std::string manifest_path;
  auto* rp = app.add_subcommand("replay", "Re-run a command from its manifest and compare outputs");
  rp->add_option("--manifest", manifest_path)->required()->check(CLI::ExistingFile);
  common(rp, true);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << toolkit_version() << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    err << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kValidation;
  }

  try {
    if (s->parsed()) {
      synth.spec.kind = parse_synth_kind(synth_kind);
      synth.spec.helix_periods = parse_period_list(synth_periods);
      synth.format = parse_file_format(synth_format);
      synth.dtype = parse_dtype(synth_dtype);
      run_synth(synth, out_dir, out);
    } else if (p->parsed() || c->parsed()) {
      probe.embeddings = absolute_input(probe.embeddings);
      probe.spec = probe_flags.resolve();
      if (p->parsed()) run_probe(probe, out_dir, threads, out);
      else run_controls(probe, out_dir, threads, out);
    } else if (a->parsed()) {
      analyze.embeddings = absolute_input(analyze.embeddings);
      analyze.probe_file = absolute_input(analyze.probe_file);
      run_analyze(analyze, out_dir, out);
    } else if (t->parsed()) {
      train.embeddings = absolute_input(train.embeddings);
      train.spec = train_flags.resolve();
      if (!exclude_text.empty()) train.exclude = parse_label_list(exclude_text);
      run_train(train, out_dir, out);
    } else if (r->parsed()) {
      repair.embeddings = absolute_input(repair.embeddings);
      repair.probe_file = absolute_input(repair.probe_file);
      if (targets_text != "auto") repair.targets = parse_label_list(targets_text);
      if (max_disp_opt->count() > 0) repair.repair.max_displacement = max_disp;
      repair.repair.seed = repair.seed;
      run_repair(repair, out_dir, threads, out);
    } else if (rp->parsed()) {
      const RunManifest recorded = read_manifest(manifest_path);
      const RunManifest fresh = run_from_manifest(recorded, out_dir, threads, out);
      std::size_t differing = 0;
      for (const auto& want : recorded.outputs) {
        const auto it = std::find_if(fresh.outputs.begin(), fresh.outputs.end(),
                                     [&](const auto& f) { return f.path == want.path; });
        if (it == fresh.outputs.end() || it->sha256 != want.sha256) {
          err << "replay: " << want.path << " differs from the recorded output\n";
          ++differing;
        }
      }
      if (differing > 0 || fresh.outputs.size() != recorded.outputs.size()) {
        err << "replay: outputs are not identical\n";
        return kRuntime;
      }
      out << "replay: " << fresh.outputs.size() << " outputs identical to the manifest\n";
    }
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}

}  // namespace numprobe::cli
