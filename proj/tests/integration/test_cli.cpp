// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "numprobe/embstore.hpp"
#include "numprobe_cli/commands.hpp"
#include "numprobe_cli/manifest.hpp"
#include "../unit/test_support.hpp"

namespace numprobe::cli {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(test::read_file(p)); }

class CliTest : public ::testing::Test {
 protected:
  test::TempDir dir;

  std::string path(const std::string& name) const { return (dir.path() / name).string(); }

  std::string make_helix() {
    const CliRun r = cli({"synth", "--kind", "helix", "--n", "120", "--d", "16", "--noise", "0.01", "--periods",
                       "2,5,10,100", "--seed", "3", "--out", path("helix")});
    EXPECT_EQ(r.code, 0) << r.err;
    return path("helix/embeddings.emb");
  }
};

TEST_F(CliTest, SynthGaussianShapeAndManifest) {
  const CliRun r = cli({"synth", "--kind", "gaussian", "--n", "100", "--d", "8", "--seed", "1", "--out", path("g")});
  ASSERT_EQ(r.code, 0) << r.err;
  const EmbeddingMatrix m = load_embeddings(dir.path() / "g/embeddings.emb", FileFormat::emb1);
  EXPECT_EQ(m.rows(), 100);
  EXPECT_EQ(m.dim(), 8);

  const RunManifest man = read_manifest(dir.path() / "g" / kManifestName);
  EXPECT_EQ(man.command, "synth");
  EXPECT_EQ(man.seed, 1u);
  EXPECT_EQ(man.version, toolkit_version());
  EXPECT_TRUE(man.inputs.empty());
  ASSERT_EQ(man.outputs.size(), 1u);
  EXPECT_EQ(man.outputs[0].path, "embeddings.emb");
  EXPECT_EQ(man.outputs[0].sha256, sha256_file(dir.path() / "g/embeddings.emb"));
  EXPECT_EQ(man.config.at("n"), 100);
}

TEST_F(CliTest, SinProbeOnGaussianStaysNearChance) {
  ASSERT_EQ(cli({"synth", "--kind", "gaussian", "--n", "100", "--d", "8", "--seed", "1", "--out", path("g")}).code, 0);
  const CliRun r = cli({"probe", "--embeddings", path("g/embeddings.emb"), "--probe", "sin", "--folds", "5",
                     "--threads", "1", "--out", path("p")});
  ASSERT_EQ(r.code, 0) << r.err;
  const nlohmann::json report = read_json(dir.path() / "p/cv_report.json");
  EXPECT_LE(report.at("mean_accuracy").get<double>(), 0.05);
  EXPECT_EQ(report.at("fold_count"), 5);
  EXPECT_TRUE(fs::exists(dir.path() / "p/cv_tokens.csv"));
  EXPECT_TRUE(fs::exists(dir.path() / "p/decodability.json"));

  const RunManifest man = read_manifest(dir.path() / "p" / kManifestName);
  ASSERT_EQ(man.inputs.size(), 1u);
  EXPECT_TRUE(fs::path(man.inputs[0].path).is_absolute());
  EXPECT_EQ(man.inputs[0].sha256, sha256_file(dir.path() / "g/embeddings.emb"));
}

TEST_F(CliTest, RepairAutoTargetsAreTheUndecodableLabels) {
  const std::string emb = make_helix();
  ASSERT_EQ(cli({"train", "--embeddings", emb, "--probe", "sin", "--lr", "1e-2", "--max-epochs", "60", "--out",
                 path("t")}).code, 0);
  const CliRun r = cli({"repair", "--embeddings", emb, "--probe-file", path("t/probe.bin"), "--targets", "auto",
                     "--folds", "4", "--max-steps", "200", "--out", path("r")});
  ASSERT_EQ(r.code, 0) << r.err;
  const nlohmann::json table = read_json(dir.path() / "r/decodability.json");
  const nlohmann::json report = read_json(dir.path() / "r/repair_report.json");
  std::vector<Label> repaired;
  for (const auto& t : report.at("tokens")) repaired.push_back(t.at("label").get<Label>());
  EXPECT_EQ(repaired, table.at("undecodable").get<std::vector<Label>>());
  EXPECT_FALSE(repaired.empty());
  const EmbeddingMatrix out = load_embeddings(dir.path() / "r/repaired.emb", FileFormat::emb1);
  EXPECT_EQ(out.rows(), 120);
}

TEST_F(CliTest, NpyPairInput) {
  ASSERT_EQ(cli({"synth", "--kind", "linear", "--n", "50", "--d", "4", "--format", "npy_pair", "--out", path("n")}).code,
            0);
  EXPECT_TRUE(fs::exists(dir.path() / "n/embeddings.values.npy"));
  EXPECT_TRUE(fs::exists(dir.path() / "n/embeddings.labels.npy"));
  const CliRun r = cli({"probe", "--embeddings", path("n/embeddings"), "--probe", "lin", "--folds", "5", "--out",
                     path("p")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_json(dir.path() / "p/cv_report.json").at("mean_accuracy"), 1.0);
  const RunManifest man = read_manifest(dir.path() / "p" / kManifestName);
  EXPECT_EQ(man.inputs.size(), 2u);
}

TEST_F(CliTest, ValidationErrorsExitOne) {
  const CliRun unknown = cli({"probe", "--embeddings", "x", "--probe", "sin", "--frobnicate", "--out", path("o")});
  EXPECT_EQ(unknown.code, 1);
  EXPECT_NE((unknown.out + unknown.err).find("Usage"), std::string::npos);

  const std::string emb = make_helix();
  EXPECT_EQ(cli({"probe", "--embeddings", emb, "--probe", "lin", "--folds", "1", "--out", path("o")}).code, 1);
  EXPECT_EQ(cli({"probe", "--embeddings", emb, "--probe", "cos", "--out", path("o")}).code, 1);
  EXPECT_EQ(cli({"probe", "--embeddings", path("missing.emb"), "--probe", "lin", "--out", path("o")}).code, 1);
  EXPECT_EQ(cli({"probe", "--embeddings", emb, "--probe", "sin", "--lr", "-1", "--out", path("o")}).code, 1);
  EXPECT_EQ(cli({"synth", "--kind", "helix", "--d", "4", "--out", path("o")}).code, 1);
  EXPECT_EQ(cli({}).code, 1);
}

TEST_F(CliTest, HelpAndVersionExitZero) {
  const CliRun help = cli({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("repair"), std::string::npos);
  const CliRun version = cli({"--version"});
  EXPECT_EQ(version.code, 0);
  EXPECT_NE(version.out.find(std::string(toolkit_version())), std::string::npos);
}

TEST_F(CliTest, CorruptInputExitsTwo) {
  test::write_file(dir.path() / "bad.emb", "EMB1 but not really");
  const CliRun r = cli({"probe", "--embeddings", path("bad.emb"), "--probe", "lin", "--out", path("o")});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, ReplayReproducesAndDetectsChanges) {
  const std::string emb = make_helix();
  ASSERT_EQ(cli({"probe", "--embeddings", emb, "--probe", "lin", "--folds", "4", "--out", path("p")}).code, 0);
  const CliRun ok = cli({"replay", "--manifest", path("p/manifest.json"), "--out", path("p2")});
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_EQ(test::read_file(dir.path() / "p/manifest.json"), test::read_file(dir.path() / "p2/manifest.json"));

  nlohmann::json tampered = read_json(dir.path() / "p/manifest.json");
  tampered["outputs"][0]["sha256"] = std::string(64, '0');
  write_json(tampered, dir.path() / "tampered.json");
  EXPECT_EQ(cli({"replay", "--manifest", path("tampered.json"), "--out", path("p3")}).code, 2);

  std::string bytes = test::read_file(emb);
  bytes.back() ^= 0x01;
  test::write_file(emb, bytes);
  EXPECT_EQ(cli({"replay", "--manifest", path("p/manifest.json"), "--out", path("p4")}).code, 1);

  test::write_file(dir.path() / "garbage.json", "{not json");
  EXPECT_EQ(cli({"replay", "--manifest", path("garbage.json"), "--out", path("p5")}).code, 2);
}

TEST(Sha256, KnownVectors) {
  test::TempDir dir;
  test::write_file(dir.path() / "abc", "abc");
  EXPECT_EQ(sha256_file(dir.path() / "abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  test::write_file(dir.path() / "empty", "");
  EXPECT_EQ(sha256_file(dir.path() / "empty"), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

}  // namespace
}  // namespace numprobe::cli
