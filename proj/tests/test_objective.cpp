#include "activesplat/objective.hpp"
#include "activesplat/scene.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace activesplat;

namespace {

PointCloud points(int n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  PointCloud pc;
  for (int i = 0; i < n; ++i) pc.add(Vec3(u(rng), u(rng), u(rng)), Vec3(0.5, 0.5, 0.5));
  return pc;
}

struct SmallScene {
  SplatModel scene;
  CameraIntrinsics intr = CameraIntrinsics::from_fov(48, 48, 0.9);
  std::vector<CameraPose> ring;

  SmallScene() {
    SceneSpec spec;
    spec.n_primitives = 300;
    spec.seed = 4;
    scene = generate_scene(spec);
    for (int i = 0; i < 16; ++i) {
      const double a = 2.0 * std::numbers::pi * i / 16.0;
      ring.push_back(look_at(Vec3(3.0 * std::cos(a), 3.0 * std::sin(a), 0.4 * std::sin(3 * a)), Vec3::Zero()));
    }
  }
};

}  // namespace

TEST(Density, CountsAndNormalizes) {
  PointCloud pc;
  EXPECT_EQ(density(pc), 0.0);
  for (int i = 0; i < 7; ++i) pc.add(Vec3::Zero(), Vec3::Zero());
  EXPECT_EQ(density(pc), 7.0);
  EXPECT_DOUBLE_EQ(density(pc, 1000.0), 0.007);
}

TEST(Occupancy, EmptyAndSingleOctant) {
  const VoxelGrid g(Vec3::Zero(), Vec3::Ones(), {2, 2, 2});
  EXPECT_EQ(occupancy(g, PointCloud{}), 0.0);
  PointCloud pc;
  pc.add(Vec3(0.2, 0.7, 0.3), Vec3::Zero());
  EXPECT_EQ(occupancy(g, pc), 0.125);
}

TEST(Occupancy, MatchesNestedLoopOracleExactly) {
  std::mt19937_64 rng(21);
  const VoxelGrid g(Vec3::Constant(-1), Vec3::Constant(1), {6, 5, 4});
  for (int trial = 0; trial < 10; ++trial) {
    const PointCloud pc = points(100, rng, -1.1, 1.1);
    EXPECT_EQ(occupancy(g, pc), oracle::occupancy_nested(g, pc));
  }
}

TEST(Occupancy, OccupiedVoxelsNeverExceedPoints) {
  std::mt19937_64 rng(1);
  const VoxelGrid g(Vec3::Constant(-1), Vec3::Constant(1), {16, 16, 16});
  for (int n : {0, 1, 5, 50}) {
    const PointCloud pc = points(n, rng);
    EXPECT_LE(occupancy(g, pc) * g.voxel_count(), static_cast<double>(n));
  }
}

TEST(ScoreCloud, ProductIsExact) {
  std::mt19937_64 rng(8);
  const VoxelGrid g(Vec3::Constant(-1), Vec3::Constant(1), {8, 8, 8});
  for (double norm : {1.0, 3.0, 1000.0}) {
    const auto v = score_cloud(points(37, rng), g, norm);
    EXPECT_EQ(v.r_q, v.density * v.occupancy);
    EXPECT_GE(v.occupancy, 0.0);
    EXPECT_LE(v.occupancy, 1.0);
  }
}

TEST(EvaluateRq, NoiselessObservationEqualsRq) {
  SmallScene s;
  const ReconstructionOracle o{s.scene, s.intr};
  const VoxelGrid g(Vec3::Constant(-1), Vec3::Constant(1));
  const std::vector<CameraPose> views(s.ring.begin(), s.ring.begin() + 4);
  const auto v = evaluate_rq(std::span<const CameraPose>(views), o, g, 0.0, 99);
  EXPECT_GT(v.r_q, 0.0);
  EXPECT_EQ(v.y, v.r_q);
  EXPECT_EQ(v.r_q, v.density * v.occupancy);
}

TEST(EvaluateRq, NoisyObservationIsSeeded) {
  SmallScene s;
  const ReconstructionOracle o{s.scene, s.intr};
  const VoxelGrid g(Vec3::Constant(-1), Vec3::Constant(1));
  const std::vector<CameraPose> views(s.ring.begin(), s.ring.begin() + 4);
  const auto a = evaluate_rq(std::span<const CameraPose>(views), o, g, 2.0, 5);
  const auto b = evaluate_rq(std::span<const CameraPose>(views), o, g, 2.0, 5);
  const auto c = evaluate_rq(std::span<const CameraPose>(views), o, g, 2.0, 6);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.y, a.r_q);
  EXPECT_NE(a.y, c.y);
  EXPECT_EQ(a.r_q, c.r_q);
}

TEST(EvaluateRq, BlindViewsThrowOrScoreZero) {
  SmallScene s;
  const ReconstructionOracle o{s.scene, s.intr};
  const VoxelGrid g(Vec3::Constant(-1), Vec3::Constant(1));
  const std::vector<CameraPose> away{look_at(Vec3(5, 0, 0), Vec3(10, 0, 0)), look_at(Vec3(5, 1, 0), Vec3(10, 1, 0))};
  EXPECT_THROW(evaluate_rq(std::span<const CameraPose>(away), o, g, 0.0, 1), OracleFailure);
  const auto z = evaluate_rq_or_zero(std::span<const CameraPose>(away), o, g, 0.0, 1);
  EXPECT_TRUE(z.degenerate);
  EXPECT_EQ(z.density, 0.0);
  EXPECT_EQ(z.occupancy, 0.0);
  EXPECT_EQ(z.r_q, 0.0);
  EXPECT_EQ(z.y, 0.0);
}

TEST(EvaluateRq, MonotoneOverNestedViewSets) {
  SmallScene s;
  const ReconstructionOracle o{s.scene, s.intr};
  const VoxelGrid g(Vec3::Constant(-1), Vec3::Constant(1));
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 15; ++trial) {
    std::vector<CameraPose> b = s.ring;
    std::shuffle(b.begin(), b.end(), rng);
    std::uniform_int_distribution<std::size_t> nb(2, b.size());
    b.resize(nb(rng));
    std::uniform_int_distribution<std::size_t> na(1, b.size());
    const std::vector<CameraPose> a(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(na(rng)));
    const auto va = evaluate_rq_or_zero(std::span<const CameraPose>(a), o, g, 0.0, 0);
    const auto vb = evaluate_rq_or_zero(std::span<const CameraPose>(b), o, g, 0.0, 0);
    EXPECT_GE(vb.density, va.density);
    EXPECT_GE(vb.occupancy, va.occupancy);
    EXPECT_GE(vb.r_q, va.r_q);
  }
}

TEST(EvaluateRq, OrderInvariant) {
  SmallScene s;
  const ReconstructionOracle o{s.scene, s.intr};
  const VoxelGrid g(Vec3::Constant(-1), Vec3::Constant(1));
  std::vector<CameraPose> v(s.ring.begin(), s.ring.begin() + 6);
  const auto a = evaluate_rq(std::span<const CameraPose>(v), o, g, 0.0, 0);
  std::reverse(v.begin(), v.end());
  const auto b = evaluate_rq(std::span<const CameraPose>(v), o, g, 0.0, 0);
  EXPECT_EQ(a.r_q, b.r_q);
}
