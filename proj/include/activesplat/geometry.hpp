#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

namespace activesplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Pinhole intrinsics. Camera space is x right, y down, z forward.
struct CameraIntrinsics {
  double focal_x = 64.0;
  double focal_y = 64.0;
  Vec2 principal_point{32.0, 32.0};
  int image_width = 64;
  int image_height = 64;
  double near_plane = 0.05;
  double far_plane = 100.0;

  bool valid() const {
    return focal_x > 0.0 && focal_y > 0.0 && near_plane > 0.0 && near_plane < far_plane &&
           image_width > 0 && image_height > 0 && principal_point.x() >= 0.0 &&
           principal_point.x() <= image_width && principal_point.y() >= 0.0 &&
           principal_point.y() <= image_height;
  }

  /// Square image with the given horizontal field of view (radians).
  static CameraIntrinsics from_fov(int width, int height, double fov_x, double near_plane = 0.05,
                                   double far_plane = 100.0) {
    CameraIntrinsics k;
    k.image_width = width;
    k.image_height = height;
    k.focal_x = 0.5 * width / std::tan(0.5 * fov_x);
    k.focal_y = k.focal_x;
    k.principal_point = Vec2(0.5 * width, 0.5 * height);
    k.near_plane = near_plane;
    k.far_plane = far_plane;
    return k;
  }
};

/// Camera position plus world-to-camera rotation.
struct CameraPose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();

  CameraPose() = default;
  CameraPose(Vec3 p, Quat q) : position(std::move(p)), orientation(q.normalized()) {}

  Mat3 rotation() const { return orientation.toRotationMatrix(); }

  Vec3 to_camera(const Vec3& world) const { return orientation * (world - position); }
  Vec3 to_world(const Vec3& cam) const { return orientation.conjugate() * cam + position; }

  /// Unit viewing direction (camera +z) in world coordinates.
  Vec3 view_direction() const { return orientation.conjugate() * Vec3::UnitZ(); }

  /// World-to-camera rigid transform.
  Eigen::Isometry3d transform() const {
    Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
    t.linear() = rotation();
    t.translation() = -(orientation * position);
    return t;
  }

  static CameraPose from_transform(const Eigen::Isometry3d& world_to_cam) {
    Quat q(world_to_cam.linear());
    Vec3 pos = -(world_to_cam.linear().transpose() * world_to_cam.translation());
    return CameraPose(pos, q);
  }

  CameraPose inverse() const { return from_transform(transform().inverse()); }

  /// Transform composition: (a * b).transform() == a.transform() * b.transform().
  friend CameraPose operator*(const CameraPose& a, const CameraPose& b) {
    return from_transform(a.transform() * b.transform());
  }

  bool operator==(const CameraPose& o) const {
    return position == o.position && orientation.coeffs() == o.orientation.coeffs();
  }
};

/// Pose at `position` looking at `target`. The world up axis maps to image-up.
inline CameraPose look_at(const Vec3& position, const Vec3& target, const Vec3& up = Vec3::UnitZ()) {
  Vec3 z = (target - position).normalized();
  Vec3 x = z.cross(up);
  if (x.norm() < 1e-9) x = z.cross(Vec3::UnitX());
  if (x.norm() < 1e-9) x = z.cross(Vec3::UnitY());
  x.normalize();
  Vec3 y = z.cross(x);
  Mat3 r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();
  return CameraPose(position, Quat(r));
}

struct PixelDepth {
  Vec2 pixel;
  double depth;
};

/// Projects a world point. Absent when behind the camera or outside the frustum.
inline std::optional<PixelDepth> world_to_pixel(const CameraPose& pose, const CameraIntrinsics& intr,
                                                const Vec3& p) {
  const Vec3 c = pose.to_camera(p);
  if (!(c.z() > intr.near_plane && c.z() < intr.far_plane)) return std::nullopt;
  const double u = intr.focal_x * c.x() / c.z() + intr.principal_point.x();
  const double v = intr.focal_y * c.y() / c.z() + intr.principal_point.y();
  if (u < 0.0 || u > intr.image_width || v < 0.0 || v > intr.image_height) return std::nullopt;
  return PixelDepth{Vec2(u, v), c.z()};
}

inline Vec3 pixel_to_world(const CameraPose& pose, const CameraIntrinsics& intr, const Vec2& pixel,
                           double depth) {
  const double x = (pixel.x() - intr.principal_point.x()) / intr.focal_x * depth;
  const double y = (pixel.y() - intr.principal_point.y()) / intr.focal_y * depth;
  return pose.to_world(Vec3(x, y, depth));
}

struct ColoredPoint {
  Vec3 position;
  Vec3 color;  // RGB in [0,1]
};

/// Triangulated points plus, per point, the indices of the views that observed it.
struct PointCloud {
  static constexpr int kExternalView = -1;

  std::vector<ColoredPoint> points;
  std::vector<std::vector<int>> provenance;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  void add(const Vec3& position, const Vec3& color, std::vector<int> views = {}) {
    points.push_back({position, color});
    provenance.push_back(std::move(views));
  }

  bool valid() const {
    if (points.size() != provenance.size()) return false;
    for (const auto& p : points) {
      if (!p.position.allFinite()) return false;
      if ((p.color.array() < 0.0).any() || (p.color.array() > 1.0).any()) return false;
    }
    return true;
  }

  PointCloud merged(const PointCloud& other) const {
    PointCloud out = *this;
    out.points.insert(out.points.end(), other.points.begin(), other.points.end());
    out.provenance.insert(out.provenance.end(), other.provenance.begin(), other.provenance.end());
    return out;
  }
};

/// Axis-aligned voxel partition of a bounding box with an occupancy bit per voxel.
class VoxelGrid {
public:
  VoxelGrid(Vec3 bbox_min, Vec3 bbox_max, std::array<int, 3> resolution = {16, 16, 16})
      : min_(std::move(bbox_min)), max_(std::move(bbox_max)), res_(resolution) {
    if (!((min_.array() < max_.array()).all()))
      throw std::invalid_argument("VoxelGrid: bbox_min must be < bbox_max componentwise");
    if (res_[0] <= 0 || res_[1] <= 0 || res_[2] <= 0)
      throw std::invalid_argument("VoxelGrid: resolution must be positive");
    occupied_.assign(voxel_count(), false);
  }

  const Vec3& bbox_min() const { return min_; }
  const Vec3& bbox_max() const { return max_; }
  const std::array<int, 3>& resolution() const { return res_; }
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(res_[0]) * static_cast<std::size_t>(res_[1]) *
           static_cast<std::size_t>(res_[2]);
  }
  const std::vector<bool>& occupied() const { return occupied_; }

  std::size_t occupied_count() const {
    std::size_t n = 0;
    for (bool b : occupied_) n += b ? 1 : 0;
    return n;
  }

  /// Lower face coordinate of voxel slab `i` along `axis`; face(axis, res) == bbox_max.
  double face(int axis, int i) const {
    if (i >= res_[axis]) return max_[axis];
    return min_[axis] + (max_[axis] - min_[axis]) * static_cast<double>(i) / res_[axis];
  }

  std::size_t flat_index(int ix, int iy, int iz) const {
    return static_cast<std::size_t>(ix) +
           static_cast<std::size_t>(res_[0]) *
               (static_cast<std::size_t>(iy) + static_cast<std::size_t>(res_[1]) * iz);
  }

  /// Flat index of the voxel containing p. A point on an internal face belongs to the
  /// higher-index voxel; points on the bbox_max faces fold into the last voxel.
  std::optional<std::size_t> voxel_index(const Vec3& p) const {
    std::array<int, 3> idx{};
    for (int a = 0; a < 3; ++a) {
      const double v = p[a];
      if (!(v >= min_[a] && v <= max_[a])) return std::nullopt;
      int i = static_cast<int>(std::floor((v - min_[a]) / (max_[a] - min_[a]) * res_[a]));
      i = std::clamp(i, 0, res_[a] - 1);
      // Snap to the exact face definition so rounding never disagrees with face().
      while (i + 1 < res_[a] && v >= face(a, i + 1)) ++i;
      while (i > 0 && v < face(a, i)) --i;
      idx[a] = i;
    }
    return flat_index(idx[0], idx[1], idx[2]);
  }

  VoxelGrid cleared() const {
    VoxelGrid g = *this;
    g.occupied_.assign(voxel_count(), false);
    return g;
  }

  /// Returns a copy with every voxel that contains at least one cloud point marked.
  VoxelGrid mark_points(const PointCloud& pc) const {
    VoxelGrid g = *this;
    for (const auto& pt : pc.points) {
      if (auto i = g.voxel_index(pt.position)) g.occupied_[*i] = true;
    }
    return g;
  }

  Vec3 diagonal() const { return max_ - min_; }

private:
  Vec3 min_;
  Vec3 max_;
  std::array<int, 3> res_;
  std::vector<bool> occupied_;
};

inline VoxelGrid mark_points(const VoxelGrid& grid, const PointCloud& pc) { return grid.mark_points(pc); }

}  // namespace activesplat
