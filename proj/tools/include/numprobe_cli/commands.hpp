// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "numprobe/crossval.hpp"
#include "numprobe/embstore.hpp"
#include "numprobe/repair.hpp"
#include "numprobe/spectra.hpp"
#include "numprobe/synthgen.hpp"
#include "numprobe_cli/manifest.hpp"

namespace numprobe::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2 };

struct SynthOptions {
  SynthSpec spec;
  FileFormat format = FileFormat::emb1;
  DType dtype = DType::f64;
};

struct ProbeOptions {
  std::string embeddings;
  ProbeSpec spec;
  int folds = 20;
  std::uint64_t seed = 0;
};

struct AnalyzeOptions {
  std::string embeddings;
  int pca_dims = kWavePcaDims;
  bool spectrum = false;
  /// Components fed to the spectrum (clamped to min(N, d)).
  int spectrum_dims = kSpectrumPcaDims;
  std::string probe_file;
};

struct TrainOptions {
  std::string embeddings;
  ProbeSpec spec;
  /// Labels left out of training.
  std::vector<Label> exclude;
};

struct RepairOptions {
  std::string embeddings;
  std::string probe_file;
  /// Empty means "auto": the undecodable labels of a fresh cross-validation.
  std::optional<std::vector<Label>> targets;
  RepairConfig repair;
  int folds = 20;
  std::uint64_t seed = 0;
};

nlohmann::json to_config(const SynthOptions& o);
nlohmann::json to_config(const ProbeOptions& o);
nlohmann::json to_config(const AnalyzeOptions& o);
nlohmann::json to_config(const TrainOptions& o);
nlohmann::json to_config(const RepairOptions& o);

SynthOptions synth_from_config(const nlohmann::json& j);
ProbeOptions probe_from_config(const nlohmann::json& j);
AnalyzeOptions analyze_from_config(const nlohmann::json& j);
TrainOptions train_from_config(const nlohmann::json& j);
RepairOptions repair_from_config(const nlohmann::json& j);

// Each command writes its outputs and manifest.json into `out_dir` (created
// if needed) and returns the manifest. Progress goes to `log`.
RunManifest run_synth(const SynthOptions& o, const std::filesystem::path& out_dir, std::ostream& log);
RunManifest run_probe(const ProbeOptions& o, const std::filesystem::path& out_dir, int threads,
                      std::ostream& log);
RunManifest run_controls(const ProbeOptions& o, const std::filesystem::path& out_dir, int threads,
                         std::ostream& log);
RunManifest run_analyze(const AnalyzeOptions& o, const std::filesystem::path& out_dir, std::ostream& log);
RunManifest run_train(const TrainOptions& o, const std::filesystem::path& out_dir, std::ostream& log);
RunManifest run_repair(const RepairOptions& o, const std::filesystem::path& out_dir, int threads,
                       std::ostream& log);

/// Re-runs the command recorded in `m` into `out_dir`.
RunManifest run_from_manifest(const RunManifest& m, const std::filesystem::path& out_dir, int threads,
                              std::ostream& log);

/// Parses `args` (without the program name) and runs one command.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

std::string_view toolkit_version();

}  // namespace numprobe::cli
