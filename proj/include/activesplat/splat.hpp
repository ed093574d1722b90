#pragma once

#include "activesplat/errors.hpp"
#include "activesplat/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace activesplat {

/// One anisotropic splat: covariance is R S S^T R^T with S = diag(scale).
struct Gaussian3D {
  Vec3 mean = Vec3::Zero();
  Quat rotation = Quat::Identity();
  Vec3 scale = Vec3::Ones();
  double opacity = 1.0;
  Vec3 color = Vec3::Constant(0.5);

  Mat3 covariance() const {
    const Mat3 r = rotation.normalized().toRotationMatrix();
    const Mat3 m = r * scale.asDiagonal();
    return m * m.transpose();
  }

  bool valid() const {
    return mean.allFinite() && (scale.array() > 0.0).all() && opacity > 0.0 && opacity <= 1.0 &&
           (color.array() >= 0.0).all() && (color.array() <= 1.0).all() &&
           std::abs(rotation.norm() - 1.0) < 1e-6;
  }
};

struct SplatModel {
  std::vector<Gaussian3D> gaussians;
  Vec3 background = Vec3::Zero();

  std::size_t size() const { return gaussians.size(); }
  bool empty() const { return gaussians.empty(); }
};

/// alpha * exp(-0.5 (z-m)^T Sigma^-1 (z-m)), evaluated through the factorization so that
/// Sigma^-1 = R S^-2 R^T never has to be formed.
inline double eval_gaussian(const Gaussian3D& g, const Vec3& z) {
  const Vec3 local = g.rotation.normalized().conjugate() * (z - g.mean);
  const Vec3 w = local.cwiseQuotient(g.scale);
  return g.opacity * std::exp(-0.5 * w.squaredNorm());
}

struct SplatInitConfig {
  double initial_opacity = 0.1;
  int neighbors = 3;
  double min_scale = 1e-4;
  /// Diagonal used for the upper scale clamp; <= 0 means the cloud's own bbox diagonal.
  double bbox_diagonal = 0.0;
};

namespace detail {

inline double cloud_diagonal(const PointCloud& pc) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& p : pc.points) {
    lo = lo.cwiseMin(p.position);
    hi = hi.cwiseMax(p.position);
  }
  return (hi - lo).norm();
}

}  // namespace detail

/// One isotropic Gaussian per cloud point, sized from its nearest neighbors.
inline SplatModel init_from_cloud(const PointCloud& pc, const SplatInitConfig& cfg = {}) {
  if (pc.empty()) throw EmptyCloud();
  const double diag = cfg.bbox_diagonal > 0.0 ? cfg.bbox_diagonal : detail::cloud_diagonal(pc);
  const double hi = std::max(cfg.min_scale, diag / 10.0);
  const int k = std::max(1, cfg.neighbors);

  SplatModel model;
  model.gaussians.reserve(pc.size());
  std::vector<double> nearest;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    nearest.clear();
    for (std::size_t j = 0; j < pc.size(); ++j) {
      if (j == i) continue;
      const double d = (pc.points[j].position - pc.points[i].position).norm();
      if (static_cast<int>(nearest.size()) < k) {
        nearest.push_back(d);
        std::push_heap(nearest.begin(), nearest.end());
      } else if (d < nearest.front()) {
        std::pop_heap(nearest.begin(), nearest.end());
        nearest.back() = d;
        std::push_heap(nearest.begin(), nearest.end());
      }
    }
    double s = cfg.min_scale;
    if (!nearest.empty()) {
      double sum = 0.0;
      for (double d : nearest) sum += d;
      s = std::clamp(sum / static_cast<double>(nearest.size()), cfg.min_scale, hi);
    }
    Gaussian3D g;
    g.mean = pc.points[i].position;
    g.color = pc.points[i].color;
    g.opacity = cfg.initial_opacity;
    g.scale = Vec3::Constant(s);
    g.rotation = Quat::Identity();
    model.gaussians.push_back(g);
  }
  return model;
}

}  // namespace activesplat
