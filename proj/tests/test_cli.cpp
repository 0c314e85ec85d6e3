#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "checks.hpp"
#include "iconann/detector.hpp"
#include "iconann/synthgen.hpp"

using namespace iconann;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("iconann_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(ICONANN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// One blank screen carrying the evaluation fixture's ground truth.
fs::path fixture_corpus(const fs::path& root) {
  UISample s;
  s.id = "fixture";
  s.pixels = Image(32, 64, 255);
  s.annotations = checks::eval_fixture_truth();
  write_corpus(root / "data", {s});
  return root / "data";
}

fs::path small_corpus(const fs::path& root, int n) {
  GenConfig g;
  g.n_samples = n;
  g.seed = 5;
  generate(g, root / "data");
  return root / "data";
}

fs::path tiny_train_config(const fs::path& root) {
  const json cfg = {{"detector", {{"conv1_channels", 4}, {"conv2_channels", 4}, {"conv3_channels", 4},
                                  {"head_channels", 4}, {"text_dim", 8}, {"fusion_hidden", 4}}},
                    {"baseline", {{"conv_channels", {4, 4, 4, 4}}, {"text_dim", 8}}},
                    {"train", {{"epochs", 1}, {"batch_size", 2}}}};
  std::ofstream(root / "tiny.json") << cfg.dump();
  return root / "tiny.json";
}

}  // namespace

TEST(Cli, EvaluateFixture) {
  const auto root = scratch("eval");
  const auto data = fixture_corpus(root);
  std::ofstream(root / "pred.jsonl") << to_json(SamplePredictions{"fixture", checks::eval_fixture_detections()}).dump()
                                     << "\n";
  ASSERT_EQ(cli("evaluate --data " + data.string() + " --predictions " + (root / "pred.jsonl").string() + " --out " +
                (root / "out").string()),
            0);
  const auto m = json::parse(slurp(root / "out" / "metrics.json"));
  EXPECT_NEAR(m.at("precision").get<double>(), 2.0 / 3.0, 1e-9);
  EXPECT_NEAR(m.at("recall").get<double>(), 1.0, 1e-12);
  EXPECT_NE(slurp(root / "out" / "table.txt").find("0.667"), std::string::npos);
  EXPECT_TRUE(fs::exists(root / "out" / "per_class.csv"));
  EXPECT_EQ(json::parse(slurp(root / "out" / "run_config.json")).at("command"), "evaluate");
  fs::remove_all(root);
}

TEST(Cli, ZeroWeightCheckpointPredictsNothing) {
  const auto root = scratch("zero");
  const auto data = small_corpus(root, 3);
  auto cfg = DetectorConfig::desk_scale();
  cfg.conv1_channels = cfg.conv2_channels = cfg.conv3_channels = cfg.head_channels = 4;
  DetectorModel(cfg).save(root / "zero.ckpt");
  ASSERT_EQ(cli("predict --data " + data.string() + " --model " + (root / "zero.ckpt").string() + " --out " +
                (root / "pred").string()),
            0);
  std::ifstream in(root / "pred" / "predictions.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    EXPECT_TRUE(json::parse(line).at("detections").empty());
  }
  EXPECT_EQ(lines, 3);
  fs::remove_all(root);
}

TEST(Cli, TrainIsReproducible) {
  const auto root = scratch("train");
  const auto data = small_corpus(root, 4);
  const auto cfg = tiny_train_config(root);
  for (const std::string model : {"detector-vh", "baseline-vh-sampling"}) {
    for (const char* run : {"a", "b"}) {
      ASSERT_EQ(cli("train --data " + data.string() + " --model " + model + " --seed 7 --config " + cfg.string() +
                    " --out " + (root / (model + run)).string()),
                0)
          << model;
    }
    const auto log = slurp(root / (model + "a") / "train_log.jsonl");
    EXPECT_FALSE(log.empty());
    EXPECT_EQ(log, slurp(root / (model + "b") / "train_log.jsonl"));
    EXPECT_TRUE(fs::exists(root / (model + "a") / "model.ckpt"));
    const auto rc = json::parse(slurp(root / (model + "a") / "run_config.json"));
    EXPECT_EQ(rc.at("params").at("seed"), 7);
  }
  fs::remove_all(root);
}

TEST(Cli, GenerateAndStats) {
  const auto root = scratch("gen");
  ASSERT_EQ(cli("generate --seed 3 --n 6 --out " + (root / "data").string()), 0);
  ASSERT_EQ(cli("stats --data " + (root / "data").string() + " --out " + (root / "stats").string()), 0);
  const auto manifest = json::parse(slurp(root / "data" / "manifest.json"));
  const auto stats = json::parse(slurp(root / "stats" / "stats.json"));
  EXPECT_EQ(stats.at("class_counts"), manifest.at("class_counts"));
  fs::remove_all(root);
}

TEST(Cli, ExitCodes) {
  const auto root = scratch("codes");
  const auto data = small_corpus(root, 2);
  EXPECT_EQ(cli("train --data " + data.string() + " --model detector-vh --out " + (root / "t").string()), 2);
  EXPECT_EQ(cli("train --data " + data.string() + " --model nonsense --seed 1 --out " + (root / "t").string()), 2);
  EXPECT_EQ(cli("frobnicate"), 2);
  EXPECT_EQ(cli("stats --data " + (root / "missing").string()), 3);
  std::ofstream(root / "bad.ckpt") << "not a checkpoint";
  EXPECT_EQ(cli("predict --data " + data.string() + " --model " + (root / "bad.ckpt").string() + " --out " +
                (root / "p").string()),
            5);
  std::ofstream(root / "bad.jsonl") << "{broken\n";
  EXPECT_EQ(cli("evaluate --data " + data.string() + " --predictions " + (root / "bad.jsonl").string() + " --out " +
                (root / "e").string()),
            4);
  fs::remove_all(root);
}
