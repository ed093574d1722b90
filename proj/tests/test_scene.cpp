#include "activesplat/objective.hpp"
#include "activesplat/scene.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>
#include <set>

using namespace activesplat;

namespace {

const CameraIntrinsics kIntr = CameraIntrinsics::from_fov(48, 48, 40.0 * std::numbers::pi / 180.0);

std::vector<CameraPose> ring(int n, double radius = 3.0) {
  std::vector<CameraPose> out;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * i / n;
    out.push_back(look_at(Vec3(radius * std::cos(a), radius * std::sin(a), 0.3), Vec3::Zero()));
  }
  return out;
}

SceneSpec spec_of(SceneGenerator g, int n = 500, std::uint64_t seed = 2) {
  SceneSpec s;
  s.generator = g;
  s.n_primitives = n;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(GenerateScene, ZeroPrimitivesIsEmpty) {
  EXPECT_TRUE(generate_scene(spec_of(SceneGenerator::Clustered, 0)).empty());
}

TEST(GenerateScene, DeterministicPerSeed) {
  for (auto g : {SceneGenerator::Clustered, SceneGenerator::Shell, SceneGenerator::IndoorBox}) {
    const auto a = generate_scene(spec_of(g));
    const auto b = generate_scene(spec_of(g));
    const auto c = generate_scene(spec_of(g, 500, 3));
    ASSERT_EQ(a.size(), 500u);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a.gaussians[i].mean, b.gaussians[i].mean);
      EXPECT_EQ(a.gaussians[i].rotation.coeffs(), b.gaussians[i].rotation.coeffs());
      EXPECT_EQ(a.gaussians[i].color, b.gaussians[i].color);
      EXPECT_EQ(a.gaussians[i].opacity, b.gaussians[i].opacity);
      differs = differs || a.gaussians[i].mean != c.gaussians[i].mean;
    }
    EXPECT_TRUE(differs);
  }
}

TEST(GenerateScene, PrimitivesAreValidAndInsideBox) {
  for (auto g : {SceneGenerator::Clustered, SceneGenerator::Shell, SceneGenerator::IndoorBox}) {
    const auto spec = spec_of(g);
    for (const auto& p : generate_scene(spec).gaussians) {
      EXPECT_TRUE(p.valid());
      EXPECT_TRUE(((p.mean.array() >= spec.bbox_min.array()) && (p.mean.array() <= spec.bbox_max.array())).all());
      EXPECT_GE(p.scale.minCoeff(), spec.min_scale);
      EXPECT_LE(p.scale.maxCoeff(), spec.max_scale);
    }
  }
}

TEST(GenerateScene, ShellCentresLieOnSphere) {
  const auto spec = spec_of(SceneGenerator::Shell);
  for (const auto& p : generate_scene(spec).gaussians)
    EXPECT_NEAR((p.mean - spec.center()).norm(), spec.shell_radius(), 1e-12);
}

TEST(GenerateScene, IndoorCentresLieOnWalls) {
  const auto spec = spec_of(SceneGenerator::IndoorBox);
  const Vec3 ext = spec.bbox_max - spec.bbox_min;
  const Vec3 lo = spec.bbox_min + 0.02 * ext, hi = spec.bbox_max - 0.02 * ext;
  for (const auto& p : generate_scene(spec).gaussians) {
    int on_face = 0;
    for (int a = 0; a < 3; ++a) on_face += (p.mean[a] == lo[a] || p.mean[a] == hi[a]);
    EXPECT_GE(on_face, 1);
  }
}

TEST(GroundTruth, EmptySceneRendersBackground) {
  SplatModel m;
  m.background = Vec3(0.2, 0.4, 0.6);
  const Image img = render_ground_truth(m, ring(1)[0], kIntr);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) EXPECT_EQ(img.pixel(x, y), m.background);
}

TEST(GroundTruth, BrightestPixelAtProjectedCentre) {
  SplatModel m;
  Gaussian3D g;
  g.scale = Vec3::Constant(0.05);
  g.opacity = 0.9;
  g.color = Vec3::Ones();
  m.gaussians.push_back(g);
  const CameraPose pose = look_at(Vec3(0, -3, 0), Vec3::Zero());
  const Image img = render_ground_truth(m, pose, kIntr);
  int bx = -1, by = -1;
  double best = -1.0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      if (img.at(x, y, 0) > best) {
        best = img.at(x, y, 0);
        bx = x;
        by = y;
      }
  EXPECT_EQ(bx, 24);
  EXPECT_EQ(by, 24);
}

TEST(Oracle, SingleViewCannotTriangulate) {
  const ReconstructionOracle o{generate_scene(spec_of(SceneGenerator::Clustered)), kIntr};
  const auto views = ring(1);
  EXPECT_THROW(o.reconstruct(views), OracleFailure);
}

TEST(Oracle, IdenticalViewsTriangulateWhatOneViewSees) {
  const ReconstructionOracle o{generate_scene(spec_of(SceneGenerator::Clustered)), kIntr};
  const CameraPose v = ring(1)[0];
  const std::vector<CameraPose> views{v, v};
  const auto pc = o.reconstruct(views);
  EXPECT_EQ(pc.size(), o.visible(v).size());
}

TEST(Oracle, WithoutOcclusionTwoCoveringViewsRecoverAllCentres) {
  ReconstructionOracle o{generate_scene(spec_of(SceneGenerator::Shell)), kIntr};
  o.occlusion = false;
  const std::vector<CameraPose> views{look_at(Vec3(0, 0, 6), Vec3::Zero()), look_at(Vec3(0, 0, -6), Vec3::Zero())};
  const auto pc = o.reconstruct(views);
  ASSERT_EQ(pc.size(), o.scene.size());
  for (std::size_t i = 0; i < pc.size(); ++i) EXPECT_EQ(pc.points[i].position, o.scene.gaussians[i].mean);
}

TEST(Oracle, OcclusionHidesTheFarSideOfAShell) {
  ReconstructionOracle o{generate_scene(spec_of(SceneGenerator::Shell, 2000)), kIntr};
  const CameraPose v = look_at(Vec3(0, 0, 6), Vec3::Zero());
  const auto seen = o.visible(v);
  int far_side = 0;
  for (auto i : seen) far_side += o.scene.gaussians[i].mean.z() < -0.3;
  o.occlusion = false;
  EXPECT_LT(seen.size(), o.visible(v).size());
  EXPECT_LT(far_side, static_cast<int>(seen.size()) / 10);
}

TEST(Oracle, ProvenanceListsEnoughObservingViews) {
  ReconstructionOracle o{generate_scene(spec_of(SceneGenerator::Clustered)), kIntr};
  for (int m : {1, 2, 3}) {
    o.min_observing_views = m;
    const auto views = ring(8);
    const auto pc = o.reconstruct(views);
    EXPECT_TRUE(pc.valid());
    for (std::size_t i = 0; i < pc.size(); ++i) {
      EXPECT_GE(static_cast<int>(pc.provenance[i].size()), m);
      for (int v : pc.provenance[i]) {
        EXPECT_GE(v, 0);
        EXPECT_LT(v, 8);
      }
    }
  }
}

TEST(Oracle, SupersetOfViewsNeverLosesPoints) {
  const ReconstructionOracle o{generate_scene(spec_of(SceneGenerator::Clustered)), kIntr};
  const auto all = ring(12);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    auto b = all;
    std::shuffle(b.begin(), b.end(), rng);
    const std::vector<CameraPose> a(b.begin(), b.begin() + 4);
    std::set<Vec3, bool (*)(const Vec3&, const Vec3&)> sb([](const Vec3& x, const Vec3& y) {
      return std::lexicographical_compare(x.data(), x.data() + 3, y.data(), y.data() + 3);
    });
    for (const auto& p : o.reconstruct(b).points) sb.insert(p.position);
    try {
      for (const auto& p : o.reconstruct(a).points) EXPECT_TRUE(sb.count(p.position));
    } catch (const OracleFailure&) {
    }
  }
}

TEST(Oracle, DropoutIsKeyedAndIndependentOfOtherViews) {
  ReconstructionOracle o{generate_scene(spec_of(SceneGenerator::Clustered)), kIntr};
  o.dropout = 0.3;
  o.seed = 11;
  const auto views = ring(6);
  const auto alone = o.visible(views[2]);
  EXPECT_EQ(o.visible(views[2]), alone);
  ReconstructionOracle clean = o;
  clean.dropout = 0.0;
  const auto full = clean.visible(views[2]);
  EXPECT_LT(alone.size(), full.size());
  EXPECT_TRUE(std::includes(full.begin(), full.end(), alone.begin(), alone.end()));
  ReconstructionOracle other = o;
  other.seed = 12;
  EXPECT_NE(other.visible(views[2]), alone);
}

TEST(Oracle, CachedMatchesDirect) {
  ReconstructionOracle o{generate_scene(spec_of(SceneGenerator::Clustered)), kIntr};
  o.dropout = 0.1;
  const CachedOracle co(o);
  const auto views = ring(10);
  for (int k = 2; k <= 10; ++k) {
    const std::span<const CameraPose> s(views.data(), static_cast<std::size_t>(k));
    const auto a = o.reconstruct(s);
    const auto b = co.reconstruct(s);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a.points[i].position, b.points[i].position);
      EXPECT_EQ(a.provenance[i], b.provenance[i]);
    }
  }
}

TEST(Oracle, GeneratorNamesRoundTrip) {
  for (auto g : {SceneGenerator::Clustered, SceneGenerator::Shell, SceneGenerator::IndoorBox})
    EXPECT_EQ(parse_generator(to_string(g)), g);
  EXPECT_FALSE(parse_generator("cube"));
}
