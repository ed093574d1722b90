#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + ACTIVESPLAT_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("activesplat_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Cli, RunThenPlot) {
  const auto dir = fresh_dir("run");
  std::ofstream(dir / "tiny.cfg") << "schema_version = 1\nbudget = 2\nn_test = 2\ntest_splits = 1\n"
                                     "methods = passive-standard, fvs\ntrain_iterations = 2\n"
                                     "n_primitives = 200\nimage_width = 16\nimage_height = 16\nring_count = 12\n";
  EXPECT_EQ(run_cli("run " + (dir / "tiny.cfg").string() + " -q -o " + (dir / "out").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "report.json"));
  EXPECT_EQ(run_cli("plot " + (dir / "out" / "report.json").string() + " " + (dir / "plots").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "plots" / "scene_median_psnr.csv"));
  fs::remove_all(dir);
}

TEST(Cli, InvalidConfigExitsTwo) {
  const auto dir = fresh_dir("badcfg");
  std::ofstream(dir / "bad.cfg") << "schema_version = 1\nbudget = 20\nn_test = 10\nring_count = 30\n";
  EXPECT_EQ(run_cli("run -q " + (dir / "bad.cfg").string()), 2);
  fs::remove_all(dir);
}

TEST(Cli, IoAndParseFailuresExitThree) {
  const auto dir = fresh_dir("io");
  EXPECT_EQ(run_cli("run -q " + (dir / "missing.cfg").string()), 3);
  EXPECT_EQ(run_cli("ingest " + (dir / "missing.ply").string()), 3);
  std::ofstream(dir / "bad.ply") << "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n0\n";
  EXPECT_EQ(run_cli("ingest " + (dir / "bad.ply").string()), 3);
  std::ofstream(dir / "bad.json") << "[1, 2";
  EXPECT_EQ(run_cli("plot " + (dir / "bad.json").string() + " " + (dir / "plots").string()), 3);
  fs::remove_all(dir);
}

TEST(Cli, IngestWritesSplatModel) {
  const auto dir = fresh_dir("ingest");
  std::ofstream(dir / "c.ply") << "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
                                  "property float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\n"
                                  "end_header\n0 0 0 255 0 0\n1 0 0 0 255 0\n";
  EXPECT_EQ(run_cli("ingest " + (dir / "c.ply").string() + " --splat-out " + (dir / "s.ply").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "s.ply"));
  fs::remove_all(dir);
}
