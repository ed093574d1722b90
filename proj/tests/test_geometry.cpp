#include "activesplat/geometry.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace activesplat;

namespace {

CameraPose random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  return CameraPose(Vec3(u(rng), u(rng), u(rng)), oracle::random_quat(rng));
}

}  // namespace

TEST(CameraIntrinsics, FromFovIsValidAndCentered) {
  const auto k = CameraIntrinsics::from_fov(64, 48, 1.0);
  EXPECT_TRUE(k.valid());
  EXPECT_DOUBLE_EQ(k.principal_point.x(), 32.0);
  EXPECT_DOUBLE_EQ(k.principal_point.y(), 24.0);
  EXPECT_NEAR(k.focal_x, 32.0 / std::tan(0.5), 1e-12);
}

TEST(CameraIntrinsics, InvalidWhenPlanesOrFocalBad) {
  CameraIntrinsics k;
  k.near_plane = 2.0;
  k.far_plane = 1.0;
  EXPECT_FALSE(k.valid());
  k = {};
  k.focal_x = 0.0;
  EXPECT_FALSE(k.valid());
  k = {};
  k.principal_point = Vec2(-1.0, 3.0);
  EXPECT_FALSE(k.valid());
}

TEST(CameraPose, QuaternionIsUnit) {
  const CameraPose p(Vec3(1, 2, 3), Quat(2.0, 0.3, -0.1, 0.7));
  EXPECT_NEAR(p.orientation.norm(), 1.0, 1e-9);
}

TEST(CameraPose, ComposeWithInverseIsIdentity) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const CameraPose p = random_pose(rng);
    const Eigen::Isometry3d id = (p * p.inverse()).transform();
    EXPECT_LT((id.matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(CameraPose, LookAtPointsViewDirectionAtTarget) {
  const Vec3 pos(3, -1, 0.5), target(0, 0, 0);
  const CameraPose p = look_at(pos, target);
  EXPECT_LT((p.view_direction() - (target - pos).normalized()).norm(), 1e-12);
  // World up maps to image up (negative camera y).
  EXPECT_LT(p.to_camera(pos + Vec3::UnitZ()).y(), 0.0);
}

TEST(WorldToPixel, OpticalAxisHitsPrincipalPoint) {
  const auto k = CameraIntrinsics::from_fov(64, 64, 0.8);
  const CameraPose p = look_at(Vec3(0, 0, -5), Vec3::Zero(), Vec3::UnitY());
  for (double d : {0.5, 2.0, 7.5}) {
    const auto r = world_to_pixel(p, k, p.to_world(Vec3(0, 0, d)));
    ASSERT_TRUE(r.has_value());
    EXPECT_NEAR(r->pixel.x(), k.principal_point.x(), 1e-12);
    EXPECT_NEAR(r->pixel.y(), k.principal_point.y(), 1e-12);
    EXPECT_NEAR(r->depth, d, 1e-12);
  }
}

TEST(WorldToPixel, BehindCameraIsAbsent) {
  const auto k = CameraIntrinsics::from_fov(64, 64, 0.8);
  const CameraPose p = look_at(Vec3(0, 0, -5), Vec3::Zero(), Vec3::UnitY());
  EXPECT_FALSE(world_to_pixel(p, k, p.to_world(Vec3(0, 0, -1))).has_value());
  EXPECT_FALSE(world_to_pixel(p, k, p.to_world(Vec3(0.1, 0.1, -3))).has_value());
}

TEST(WorldToPixel, OutsideImageIsAbsent) {
  const auto k = CameraIntrinsics::from_fov(64, 64, 0.8);
  const CameraPose p;
  EXPECT_FALSE(world_to_pixel(p, k, Vec3(100, 0, 1)).has_value());
  EXPECT_FALSE(world_to_pixel(p, k, Vec3(0, 0, 1000)).has_value());  // beyond far plane
}

TEST(WorldToPixel, MatchesHomogeneousMatrixPipeline) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const auto k = CameraIntrinsics::from_fov(80, 60, 1.2);
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    const CameraPose pose = random_pose(rng);
    const Vec3 p(u(rng), u(rng), u(rng));
    const auto got = world_to_pixel(pose, k, p);
    const auto ref = oracle::project_homogeneous(pose, k, p);
    if (!ref || ref->x() < 0 || ref->x() > k.image_width || ref->y() < 0 || ref->y() > k.image_height) {
      EXPECT_FALSE(got.has_value());
      continue;
    }
    ASSERT_TRUE(got.has_value());
    EXPECT_NEAR(got->pixel.x(), ref->x(), 1e-9);
    EXPECT_NEAR(got->pixel.y(), ref->y(), 1e-9);
    ++checked;
  }
  EXPECT_GT(checked, 100);
}

TEST(WorldToPixel, DeprojectionRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const auto k = CameraIntrinsics::from_fov(64, 64, 1.0);
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    const CameraPose pose = random_pose(rng);
    const Vec3 p(u(rng), u(rng), u(rng));
    const auto px = world_to_pixel(pose, k, p);
    if (!px) continue;
    const Vec3 back = pixel_to_world(pose, k, px->pixel, px->depth);
    EXPECT_LE((back - p).norm(), 1e-7 * std::max(1.0, p.norm()));
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

TEST(PointCloud, ValidityChecksColorsAndProvenance) {
  PointCloud pc;
  pc.add(Vec3(0, 0, 0), Vec3(0.5, 0.5, 0.5), {0, 1});
  EXPECT_TRUE(pc.valid());
  pc.points.push_back({Vec3(1, 1, 1), Vec3(0.1, 0.2, 0.3)});
  EXPECT_FALSE(pc.valid());  // provenance length differs
  pc.provenance.push_back({});
  EXPECT_TRUE(pc.valid());
  pc.points.back().color.x() = 1.5;
  EXPECT_FALSE(pc.valid());
}

TEST(VoxelGrid, RejectsBadBoxAndResolution) {
  EXPECT_THROW(VoxelGrid(Vec3(0, 0, 0), Vec3(1, 0, 1)), std::invalid_argument);
  EXPECT_THROW(VoxelGrid(Vec3(0, 0, 0), Vec3(1, 1, 1), {2, 0, 2}), std::invalid_argument);
}

TEST(VoxelGrid, FirstOctantIsIndexZero) {
  const VoxelGrid g(Vec3::Zero(), Vec3::Ones(), {2, 2, 2});
  EXPECT_EQ(g.voxel_index(Vec3(0.1, 0.1, 0.1)), std::optional<std::size_t>(0));
  EXPECT_EQ(g.voxel_count(), 8u);
  EXPECT_EQ(g.occupied().size(), 8u);
}

TEST(VoxelGrid, OutsideBoxIsAbsent) {
  const VoxelGrid g(Vec3::Zero(), Vec3::Ones(), {2, 2, 2});
  EXPECT_FALSE(g.voxel_index(Vec3(1.0001, 0.5, 0.5)).has_value());
  EXPECT_FALSE(g.voxel_index(Vec3(0.5, -1e-12, 0.5)).has_value());
}

TEST(VoxelGrid, BoundaryRule) {
  const VoxelGrid g(Vec3::Zero(), Vec3::Ones(), {2, 2, 2});
  // Internal face goes up, top face folds into the last voxel.
  EXPECT_EQ(*g.voxel_index(Vec3(0.5, 0.0, 0.0)), g.flat_index(1, 0, 0));
  EXPECT_EQ(*g.voxel_index(Vec3(1.0, 1.0, 1.0)), g.flat_index(1, 1, 1));
  EXPECT_EQ(*g.voxel_index(Vec3(0.0, 0.5, 1.0)), g.flat_index(0, 1, 1));
}

TEST(VoxelGrid, IndexMatchesScanOracleIncludingFaces) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 lo(-u(rng), -u(rng), -u(rng));
    const Vec3 hi = lo + Vec3(0.2 + u(rng), 0.2 + u(rng), 0.2 + u(rng));
    std::uniform_int_distribution<int> res(1, 9);
    const VoxelGrid g(lo, hi, {res(rng), res(rng), res(rng)});
    for (int i = 0; i < 300; ++i) {
      Vec3 p;
      for (int a = 0; a < 3; ++a) {
        // Half the coordinates land exactly on faces.
        if (u(rng) < 0.5) {
          std::uniform_int_distribution<int> f(0, g.resolution()[a]);
          p[a] = g.face(a, f(rng));
        } else {
          p[a] = lo[a] + (hi[a] - lo[a]) * (1.2 * u(rng) - 0.1);
        }
      }
      const long ref = oracle::voxel_by_scan(g, p);
      const auto got = g.voxel_index(p);
      if (ref < 0) {
        EXPECT_FALSE(got.has_value());
      } else {
        ASSERT_TRUE(got.has_value());
        EXPECT_EQ(static_cast<long>(*got), ref);
      }
    }
  }
}

TEST(VoxelGrid, MarkPointsMatchesNestedLoopBitset) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  const VoxelGrid g(Vec3::Constant(-1), Vec3::Constant(1), {5, 4, 3});
  PointCloud pc;
  for (int i = 0; i < 80; ++i) pc.add(Vec3(u(rng), u(rng), u(rng)), Vec3::Zero());
  const VoxelGrid marked = g.mark_points(pc);
  for (int z = 0; z < 3; ++z)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 5; ++x) {
        const long cell = (z * 4L + y) * 5 + x;
        bool ref = false;
        for (const auto& p : pc.points) ref = ref || oracle::voxel_by_scan(g, p.position) == cell;
        EXPECT_EQ(marked.occupied()[g.flat_index(x, y, z)], ref);
      }
  EXPECT_EQ(g.occupied_count(), 0u);  // the source grid is untouched
}

TEST(VoxelGrid, MarkingUnionIsUnionOfMarkings) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const VoxelGrid g(Vec3::Constant(-1), Vec3::Constant(1), {6, 6, 6});
  PointCloud a, b;
  for (int i = 0; i < 40; ++i) a.add(Vec3(u(rng), u(rng), u(rng)), Vec3::Zero());
  for (int i = 0; i < 40; ++i) b.add(Vec3(u(rng), u(rng), u(rng)), Vec3::Zero());
  const auto ab = g.mark_points(a.merged(b)).occupied();
  const auto ma = g.mark_points(a).occupied(), mb = mark_points(g, b).occupied();
  for (std::size_t i = 0; i < ab.size(); ++i) EXPECT_EQ(ab[i], ma[i] || mb[i]);
}

TEST(VoxelGrid, IsATotalPartition) {
  const VoxelGrid g(Vec3(-1, 0, 2), Vec3(1, 3, 2.5), {4, 3, 5});
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::set<std::size_t> hit;
  for (int i = 0; i < 20000; ++i) {
    const Vec3 p = g.bbox_min() + g.diagonal().cwiseProduct(Vec3(u(rng), u(rng), u(rng)));
    const auto idx = g.voxel_index(p);
    ASSERT_TRUE(idx.has_value());
    ASSERT_LT(*idx, g.voxel_count());
    hit.insert(*idx);
  }
  EXPECT_EQ(hit.size(), g.voxel_count());
}
