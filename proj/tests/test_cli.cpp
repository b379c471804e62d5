#include <sys/wait.h>

#include <cstdlib>

#include <gtest/gtest.h>

#include "forwardctl/bench.hpp"

using namespace forwardctl;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("forwardctl_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" FORWARDCTL_CLI "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, ExitCodeForRankFailure) {
  const fs::path d = scratch("rank");
  write_text(d / "c.json", R"({"t": 3})");
  EXPECT_EQ(run("design2 --config " + (d / "c.json").string() + " --out " + d.string()), 2);
}

TEST(Cli, ExitCodeForLmiFailure) {
  // Stage 1 has an unstable mode the input cannot reach.
  const fs::path d = scratch("lmi");
  write_text(d / "s1.csv", "kind,rows,cols\nab,2,3\n2,0,0\n0,0.5,1\n");
  write_text(d / "s2.csv", "kind,rows,cols\nab,2,4\n0.5,0,1,0\n0,0.5,0,1\n");
  write_text(d / "c.json", R"({"t": 8, "system": {"stage_files": ["s1.csv", "s2.csv"]}})");
  EXPECT_EQ(run("designN --config " + (d / "c.json").string() + " --out " + d.string()), 3);
}

TEST(Cli, ExitCodeForIoAndConfigErrors) {
  const fs::path d = scratch("io");
  EXPECT_EQ(run("design2 --config " + (d / "missing.json").string()), 5);
  write_text(d / "c.json", R"({"t": 8, "unknown": 1})");
  EXPECT_EQ(run("design2 --config " + (d / "c.json").string()), 5);
  write_text(d / "c.json", R"({"t": 8})");
  EXPECT_EQ(run("design2 --config " + (d / "c.json").string(), "FORWARDCTL_SEED=abc"), 5);
}

TEST(Cli, UsageErrorIsNonzero) {
  EXPECT_NE(run("design2"), 0);
  EXPECT_NE(run("frobnicate --config x.json"), 0);
}

TEST(Cli, Design2IsByteIdenticalAcrossRuns) {
  const fs::path d = scratch("det");
  write_text(d / "c.json", R"({"t": 8})");
  const std::string cfg = (d / "c.json").string();
  ASSERT_EQ(run("design2 --config " + cfg + " --seed 7 --out " + (d / "a").string()), 0);
  ASSERT_EQ(run("design2 --config " + cfg + " --seed 7 --out " + (d / "b").string()), 0);
  const fs::path m = fs::path("design2-s7") / "controller" / "manifest.json";
  EXPECT_EQ(read_text(d / "a" / m), read_text(d / "b" / m));
  EXPECT_EQ(read_text(d / "a" / "design2-s7/controller/gain_1.csv"),
            read_text(d / "b" / "design2-s7/controller/gain_1.csv"));
}

TEST(Cli, SeedPrecedence) {
  const fs::path d = scratch("seed");
  write_text(d / "c.json", R"({"t": 8, "seed": 3})");
  const std::string cfg = (d / "c.json").string();
  ASSERT_EQ(run("collect --config " + cfg + " --out " + d.string()), 0);
  EXPECT_TRUE(fs::exists(d / "collect-s3"));
  ASSERT_EQ(run("collect --config " + cfg + " --out " + d.string(), "FORWARDCTL_SEED=4"), 0);
  EXPECT_TRUE(fs::exists(d / "collect-s4"));
  ASSERT_EQ(run("collect --config " + cfg + " --seed 5 --out " + d.string(), "FORWARDCTL_SEED=4"), 0);
  EXPECT_TRUE(fs::exists(d / "collect-s5"));
}

TEST(Cli, DesignReusesCollectedBatches) {
  const fs::path d = scratch("reuse");
  write_text(d / "c.json", R"({"t": 8, "seed": 2})");
  ASSERT_EQ(run("collect --config " + (d / "c.json").string() + " --out " + d.string()), 0);
  write_text(d / "d.json", R"({"t": 8, "seed": 2, "batches": "collect-s2/batches"})");
  ASSERT_EQ(run("design2 --config " + (d / "d.json").string() + " --out " + d.string()), 0);
  write_text(d / "v.json", R"({"t": 8, "seed": 2, "controller": "design2-s2/controller", "steps": 50})");
  ASSERT_EQ(run("verify --config " + (d / "v.json").string() + " --out " + d.string()), 0);
  const std::string v = read_text(d / "verify-s2/tables/verify.json");
  EXPECT_NE(v.find("rho_closed_loop"), std::string::npos);
  EXPECT_TRUE(fs::exists(d / "verify-s2/plots/trajectory.svg"));
  EXPECT_TRUE(fs::exists(d / "verify-s2/tables/trajectory.csv"));
}
