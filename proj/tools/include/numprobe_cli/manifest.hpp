// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace numprobe::cli {

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

struct FileDigest {
  std::string path;
  std::string sha256;

  friend bool operator==(const FileDigest&, const FileDigest&) = default;
};

/**
 * Record of one command run: enough to re-run it and check the outputs.
 *
 * Input paths are absolute; output paths are relative to the output
 * directory so that a replay into another directory yields the same manifest.
 */
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::string version;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
};

void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);

inline constexpr const char* kManifestName = "manifest.json";

void write_manifest(const RunManifest& m, const std::filesystem::path& out_dir);
RunManifest read_manifest(const std::filesystem::path& path);

/// Writes `j` with two-space indentation and a trailing newline.
void write_json(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace numprobe::cli
