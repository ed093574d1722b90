#include "activesplat/config.hpp"

#include <gtest/gtest.h>

#include <string>

using namespace activesplat;

namespace {

const std::string kMinimal = "schema_version = 1\nbudget = 4\nn_test = 2\nring_count = 12\n";

std::string config_error(const std::string& text) {
  try {
    parse_experiment_config(text);
  } catch (const ConfigInvalid& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, BenchmarkPresetParses) {
  const auto cfg = load_experiment_config(std::string(ACTIVESPLAT_PRESET_DIR) + "/benchmark.cfg");
  EXPECT_EQ(cfg.budget, 20);
  EXPECT_EQ(cfg.n_test, 10);
  ASSERT_EQ(cfg.scenes.size(), 3u);
  EXPECT_EQ(cfg.scenes[0].name, "clustered");
  EXPECT_EQ(cfg.scenes[1].spec.generator, SceneGenerator::Shell);
  EXPECT_TRUE(cfg.scenes[2].ring.outward);
  EXPECT_EQ(cfg.methods.size(), 4u);
  EXPECT_EQ(cfg.random_seeds.size(), 5u);
}

TEST(Config, MinimalConfigUsesDefaultsAndOneScene) {
  const auto cfg = parse_experiment_config(kMinimal);
  ASSERT_EQ(cfg.scenes.size(), 1u);
  EXPECT_EQ(cfg.scenes[0].ring.count, 12);
  EXPECT_EQ(cfg.methods, known_methods());
  EXPECT_EQ(cfg.test_splits, 3);
}

TEST(Config, SectionsOverrideGlobalSceneDefaults) {
  const auto cfg = parse_experiment_config(kMinimal + "n_primitives = 50\n[scene a]\n[scene b]\nn_primitives = 70\n");
  ASSERT_EQ(cfg.scenes.size(), 2u);
  EXPECT_EQ(cfg.scenes[0].spec.n_primitives, 50);
  EXPECT_EQ(cfg.scenes[1].spec.n_primitives, 70);
}

TEST(Config, HashTracksSettings) {
  const auto a = parse_experiment_config(kMinimal);
  const auto b = parse_experiment_config(kMinimal + "# comment only\n");
  const auto c = parse_experiment_config(kMinimal + "seed = 2\n");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
}

TEST(Config, PoolTooSmallNamesTheCount) {
  const auto msg = config_error("schema_version = 1\nbudget = 20\nn_test = 10\nring_count = 30\n");
  EXPECT_NE(msg.find("T + 2 + n_test = 32"), std::string::npos) << msg;
  EXPECT_NE(msg.find("30"), std::string::npos) << msg;
}

TEST(Config, RejectsBadValues) {
  EXPECT_NE(config_error(kMinimal + "methods = active, telepathy\n").find("telepathy"), std::string::npos);
  EXPECT_NE(config_error(kMinimal + "methods = fvs, fvs\n").find("twice"), std::string::npos);
  EXPECT_FALSE(config_error("schema_version = 1\nn_test = 0\nring_count = 40\n").empty());
  EXPECT_FALSE(config_error("schema_version = 1\nbudget = 0\nring_count = 40\n").empty());
  EXPECT_NE(config_error(kMinimal + "budget2 = 3\n").find("budget2"), std::string::npos);
  EXPECT_NE(config_error(kMinimal + "fov_deg = wide\n").find("fov_deg"), std::string::npos);
  EXPECT_FALSE(config_error(kMinimal + "budget = 5\n").empty());
  EXPECT_FALSE(config_error(kMinimal + "not a pair\n").empty());
  EXPECT_NE(config_error(kMinimal + "[scene x]\nbudget = 3\n").find("not allowed"), std::string::npos);
  EXPECT_FALSE(config_error(kMinimal + "[scene x]\n[scene x]\n").empty());
  EXPECT_FALSE(config_error(kMinimal + "generator = torus\n").empty());
}

TEST(Config, SchemaVersionIsRequiredAndChecked) {
  EXPECT_NE(config_error("budget = 4\nn_test = 2\nring_count = 12\n").find("schema_version"), std::string::npos);
  EXPECT_NE(config_error("schema_version = 2\nring_count = 12\nbudget = 4\nn_test = 2\n").find("schema_version"),
            std::string::npos);
}

TEST(Config, ContinuousSceneAllowsOnlyActive) {
  const std::string box = kMinimal + "candidates = box\nbox_min = -3, -3, -1\nbox_max = 3, 3, 1\n";
  EXPECT_NE(config_error(box).find("finite"), std::string::npos);
  const auto cfg = parse_experiment_config(box + "methods = active\n");
  EXPECT_TRUE(cfg.scenes[0].continuous);
  EXPECT_EQ(cfg.scenes[0].box_min, Vec3(-3, -3, -1));
}

TEST(Config, MissingFileIsIoFailure) {
  EXPECT_THROW(load_experiment_config("/nonexistent/x.cfg"), IoFailure);
}
