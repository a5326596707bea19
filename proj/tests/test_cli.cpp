#include "test_support.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

using awh::testing::TempDir;

namespace {

int run_cli(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd = std::string(AWH_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, ExitCodes) {
  TempDir dir("cli_codes");
  const auto log = dir.path() / "log";
  EXPECT_EQ(run_cli("--help", log), 0);
  EXPECT_EQ(run_cli("", log), 2);
  EXPECT_EQ(run_cli("gen", log), 2);
  EXPECT_EQ(run_cli("frobnicate", log), 2);
  EXPECT_EQ(run_cli("eval --ckpt /nonexistent.pt --manifest /nonexistent --out x", log), 2);
  std::ofstream(dir.path() / "bad.json") << "{ not json";
  EXPECT_EQ(run_cli("gen --out " + (dir.path() / "g").string() + " --config " + (dir.path() / "bad.json").string(), log), 1);
  EXPECT_FALSE(slurp(log).empty());
}

TEST(Cli, GenIsByteIdenticalAcrossRuns) {
  TempDir dir("cli_gen");
  const auto log = dir.path() / "log";
  const std::string common = " --seed 7 --image-size 64 --depth-size 16 --counts 6 3 3";
  ASSERT_EQ(run_cli("gen --out " + (dir.path() / "a").string() + common, log), 0);
  ASSERT_EQ(run_cli("gen --out " + (dir.path() / "b").string() + common, log), 0);
  for (const char* name : {"source_train.jsonl", "target_train.jsonl", "target_test.jsonl"}) {
    const auto a = slurp(dir.path() / "a" / name);
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(dir.path() / "b" / name)) << name;
  }
}

TEST(Cli, TrainEvalProjectPipeline) {
  TempDir dir("cli_pipeline");
  const auto log = dir.path() / "log";
  const auto data = dir.path() / "data";
  ASSERT_EQ(run_cli("gen --out " + data.string() + " --image-size 64 --depth-size 16 --counts 8 4 4", log), 0);
  std::ofstream(dir.path() / "c.json")
      << R"({"train": {"batch_size": 4, "critic_hidden": 8, "depth_hidden": 8, "n_critic": 1,
                       "model": {"latent_channels": 16}}})";
  const auto run = dir.path() / "run";
  ASSERT_EQ(run_cli("train --data " + data.string() + " --out " + run.string() + " --config " +
                    (dir.path() / "c.json").string() + " --pretrain-epochs 1 --epochs 1 --max-steps 1",
                log),
            0)
      << slurp(log);
  const auto ckpt = run / "checkpoint.pt";
  ASSERT_TRUE(std::filesystem::exists(ckpt));
  const auto out = dir.path() / "eval";
  ASSERT_EQ(run_cli("eval --ckpt " + ckpt.string() + " --manifest " + (data / "target_test.jsonl").string() +
                    " --out " + out.string() + " --range 0-30",
                log),
            0)
      << slurp(log);
  EXPECT_NE(slurp(log).find("mean EPE"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(out / "report.json"));
  const auto csv = slurp(out / "pck.csv");
  EXPECT_EQ(csv.rfind("threshold_mm,fraction\n", 0), 0u);

  const auto scatter = dir.path() / "scatter.csv";
  ASSERT_EQ(run_cli("project --ckpt " + ckpt.string() + " --manifest " + (data / "source_train.jsonl").string() +
                    " " + (data / "target_train.jsonl").string() + " --out " + scatter.string() + " --samples 20",
                log),
            0)
      << slurp(log);
  EXPECT_NE(slurp(log).find("warning"), std::string::npos);
  EXPECT_EQ(slurp(scatter).rfind("x,y,domain\n", 0), 0u);

  // swapped manifests are rejected with a runtime error
  EXPECT_EQ(run_cli("project --ckpt " + ckpt.string() + " --manifest " + (data / "target_train.jsonl").string() +
                    " " + (data / "source_train.jsonl").string() + " --out " + scatter.string(),
                log),
            1);
}
