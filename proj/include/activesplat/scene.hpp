#pragma once

#include "activesplat/errors.hpp"
#include "activesplat/geometry.hpp"
#include "activesplat/render.hpp"
#include "activesplat/splat.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <mutex>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace activesplat {

enum class SceneGenerator { Clustered, Shell, IndoorBox };

inline std::string_view to_string(SceneGenerator g) {
  switch (g) {
    case SceneGenerator::Clustered: return "clustered";
    case SceneGenerator::Shell: return "shell";
    case SceneGenerator::IndoorBox: return "indoor-box";
  }
  return "?";
}

inline std::optional<SceneGenerator> parse_generator(std::string_view s) {
  if (s == "clustered") return SceneGenerator::Clustered;
  if (s == "shell") return SceneGenerator::Shell;
  if (s == "indoor-box") return SceneGenerator::IndoorBox;
  return std::nullopt;
}

struct SceneSpec {
  std::uint64_t seed = 1;
  SceneGenerator generator = SceneGenerator::Clustered;
  int n_primitives = 2000;
  Vec3 bbox_min = Vec3::Constant(-1.0);
  Vec3 bbox_max = Vec3::Constant(1.0);
  double min_scale = 0.02;
  double max_scale = 0.06;
  int clusters = 6;
  Vec3 background = Vec3::Zero();

  Vec3 center() const { return 0.5 * (bbox_min + bbox_max); }
  /// Radius of the shell generator's sphere.
  double shell_radius() const { return 0.4 * (bbox_max - bbox_min).minCoeff(); }
};

namespace detail {

inline Quat random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector4d v;
  do {
    v = Eigen::Vector4d(n(rng), n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-9);
  v.normalize();
  return Quat(v[0], v[1], v[2], v[3]);
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-9);
  return v.normalized();
}

}  // namespace detail

/// Procedural ground-truth scene. Identical specs give bit-identical models.
inline SplatModel generate_scene(const SceneSpec& spec) {
  SplatModel model;
  model.background = spec.background;
  if (spec.n_primitives <= 0) return model;

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const Vec3 lo = spec.bbox_min, hi = spec.bbox_max, ext = hi - lo;
  auto uniform_in = [&](const Vec3& a, const Vec3& b) {
    return Vec3(a.x() + (b.x() - a.x()) * u01(rng), a.y() + (b.y() - a.y()) * u01(rng),
                a.z() + (b.z() - a.z()) * u01(rng));
  };

  std::vector<Vec3> centers;
  std::vector<Vec3> cluster_color;
  if (spec.generator == SceneGenerator::Clustered) {
    for (int k = 0; k < std::max(1, spec.clusters); ++k) {
      centers.push_back(uniform_in(lo + 0.2 * ext, hi - 0.2 * ext));
      cluster_color.push_back(Vec3(u01(rng), u01(rng), u01(rng)));
    }
  }
  // Box faces by area, for the indoor generator.
  const Vec3 box_lo = lo + 0.02 * ext, box_hi = hi - 0.02 * ext, box = box_hi - box_lo;
  const double areas[3] = {box.y() * box.z(), box.x() * box.z(), box.x() * box.y()};
  const double total_area = 2.0 * (areas[0] + areas[1] + areas[2]);

  std::normal_distribution<double> normal(0.0, 1.0);
  const double blob_sigma = 0.08 * ext.minCoeff();
  for (int i = 0; i < spec.n_primitives; ++i) {
    Gaussian3D g;
    Vec3 base_color(u01(rng), u01(rng), u01(rng));
    switch (spec.generator) {
      case SceneGenerator::Clustered: {
        const std::size_t k = static_cast<std::size_t>(u01(rng) * centers.size()) % centers.size();
        Vec3 p;
        do {
          p = centers[k] + blob_sigma * Vec3(normal(rng), normal(rng), normal(rng));
        } while (!((p.array() >= lo.array()).all() && (p.array() <= hi.array()).all()));
        g.mean = p;
        base_color = (0.6 * cluster_color[k] + 0.4 * base_color).eval();
        break;
      }
      case SceneGenerator::Shell:
        g.mean = spec.center() + spec.shell_radius() * detail::random_unit(rng);
        break;
      case SceneGenerator::IndoorBox: {
        double pick = u01(rng) * total_area;
        int axis = 0;
        bool upper = false;
        for (int f = 0; f < 6; ++f) {
          if (pick < areas[f / 2] || f == 5) {
            axis = f / 2;
            upper = (f % 2) == 1;
            break;
          }
          pick -= areas[f / 2];
        }
        Vec3 p = uniform_in(box_lo, box_hi);
        p[axis] = upper ? box_hi[axis] : box_lo[axis];
        g.mean = p;
        break;
      }
    }
    g.color = base_color;
    for (int a = 0; a < 3; ++a) g.scale[a] = spec.min_scale + (spec.max_scale - spec.min_scale) * u01(rng);
    g.rotation = detail::random_rotation(rng);
    g.opacity = 0.5 + 0.5 * u01(rng);
    model.gaussians.push_back(g);
  }
  return model;
}

/// Ground-truth image from the same forward model used for reconstructions.
inline Image render_ground_truth(const SplatModel& scene, const CameraPose& pose, const CameraIntrinsics& intr) {
  return render(scene, pose, intr);
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_pose(const CameraPose& pose) {
  double v[7] = {pose.position.x(),     pose.position.y(),     pose.position.z(),   pose.orientation.w(),
                 pose.orientation.x(), pose.orientation.y(), pose.orientation.z()};
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (double d : v) {
    if (d == 0.0) d = 0.0;  // fold -0.0
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    h = splitmix64(h ^ bits);
  }
  return h;
}

}  // namespace detail

/// Synthetic stand-in for SfM: a ground-truth primitive centre is triangulated when at least
/// `min_observing_views` views see it inside their frustum and unoccluded.
struct ReconstructionOracle {
  SplatModel scene;
  CameraIntrinsics intrinsics;
  int min_observing_views = 2;
  bool occlusion = true;
  /// Per (point, view) probability that an otherwise visible point is missed.
  double dropout = 0.0;
  std::uint64_t seed = 0;
  /// Occluder angular radius is atan(occluder_scale * max scale / depth).
  double occluder_scale = 1.0;

  /// Indices of primitives visible in one view. Dropout draws are keyed by (seed, pose, point)
  /// so the answer never depends on which other views are present.
  std::vector<std::uint32_t> visible(const CameraPose& pose) const {
    struct Candidate {
      std::uint32_t index;
      double depth;
      Vec3 ray;
      double cos_radius;
    };
    std::vector<Candidate> in_view;
    for (std::uint32_t i = 0; i < scene.gaussians.size(); ++i) {
      const auto& g = scene.gaussians[i];
      auto px = world_to_pixel(pose, intrinsics, g.mean);
      if (!px) continue;
      const Vec3 c = pose.to_camera(g.mean);
      const double dist = c.norm();
      const double radius = std::atan(occluder_scale * g.scale.maxCoeff() / px->depth);
      in_view.push_back({i, px->depth, c / dist, std::cos(radius)});
    }
    std::vector<std::uint32_t> out;
    if (occlusion) {
      std::sort(in_view.begin(), in_view.end(), [](const Candidate& a, const Candidate& b) {
        return a.depth < b.depth || (a.depth == b.depth && a.index < b.index);
      });
    }
    for (std::size_t k = 0; k < in_view.size(); ++k) {
      const auto& cand = in_view[k];
      bool hidden = false;
      if (occlusion) {
        for (std::size_t j = 0; j < k && !hidden; ++j) {
          const auto& occ = in_view[j];
          if (occ.depth < cand.depth && occ.ray.dot(cand.ray) > occ.cos_radius) hidden = true;
        }
      }
      if (hidden) continue;
      if (dropout > 0.0) {
        const std::uint64_t h =
            detail::splitmix64(detail::splitmix64(seed ^ detail::hash_pose(pose)) ^ cand.index);
        const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
        if (u < dropout) continue;
      }
      out.push_back(cand.index);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Cloud from precomputed per-view visibility lists (one list per view, same order).
  PointCloud assemble(std::span<const std::vector<std::uint32_t>> per_view) const {
    std::vector<std::vector<int>> seen_by(scene.gaussians.size());
    for (std::size_t v = 0; v < per_view.size(); ++v)
      for (std::uint32_t i : per_view[v]) seen_by[i].push_back(static_cast<int>(v));
    PointCloud pc;
    for (std::size_t i = 0; i < seen_by.size(); ++i) {
      if (static_cast<int>(seen_by[i].size()) < std::max(1, min_observing_views)) continue;
      pc.add(scene.gaussians[i].mean, scene.gaussians[i].color, std::move(seen_by[i]));
    }
    if (pc.empty()) throw OracleFailure("no point observed by enough views");
    return pc;
  }

  PointCloud reconstruct(std::span<const CameraPose> views) const {
    std::vector<std::vector<std::uint32_t>> per_view;
    per_view.reserve(views.size());
    for (const auto& v : views) per_view.push_back(visible(v));
    return assemble(per_view);
  }
};

inline PointCloud reconstruct(const ReconstructionOracle& oracle, std::span<const CameraPose> views,
                              const CameraIntrinsics& intr) {
  ReconstructionOracle o = oracle;
  o.intrinsics = intr;
  return o.reconstruct(views);
}

/// Memoizes per-view visibility of an oracle; a selection run re-evaluates growing view sets.
class CachedOracle {
public:
  explicit CachedOracle(const ReconstructionOracle& oracle) : oracle_(&oracle) {}

  const ReconstructionOracle& base() const { return *oracle_; }

  const std::vector<std::uint32_t>& visible(const CameraPose& pose) const {
    const auto key = detail::hash_pose(pose);
    {
      std::lock_guard lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    auto vis = oracle_->visible(pose);
    std::lock_guard lock(mutex_);
    return cache_.emplace(key, std::move(vis)).first->second;
  }

  PointCloud reconstruct(std::span<const CameraPose> views) const {
    std::vector<std::vector<std::uint32_t>> per_view;
    per_view.reserve(views.size());
    for (const auto& v : views) per_view.push_back(visible(v));
    return oracle_->assemble(per_view);
  }

private:
  const ReconstructionOracle* oracle_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cache_;
};

}  // namespace activesplat
