#pragma once

#include "activesplat/geometry.hpp"
#include "activesplat/image.hpp"
#include "activesplat/splat.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <tuple>
#include <vector>

namespace activesplat {

inline constexpr double kDilation = 0.3;          // px^2 added to the 2D covariance diagonal
inline constexpr double kMaxAlpha = 0.999;        // per-splat contribution clamp
inline constexpr double kMinTransmittance = 1e-4; // early termination threshold
inline constexpr double kCutoffSigma = 3.0;       // ellipse truncation, in standard deviations

struct Projected2DGaussian {
  Vec2 center;
  Eigen::Matrix2d cov2d;
  Eigen::Matrix2d conic;  // inverse of cov2d
  double depth = 0.0;
  double opacity = 0.0;
  Vec3 color = Vec3::Zero();
  double radius = 0.0;  // 3 sigma of the major axis, px
};

/// EWA projection: cov2d = J W Sigma W^T J^T + 0.3 I, with J the perspective Jacobian at
/// the camera-space mean. Absent when the mean lies outside the frustum expanded by three
/// standard deviations of the largest scale.
inline std::optional<Projected2DGaussian> project(const Gaussian3D& g, const CameraPose& pose,
                                                  const CameraIntrinsics& intr) {
  const Vec3 t = pose.to_camera(g.mean);
  if (!(t.z() > intr.near_plane && t.z() < intr.far_plane)) return std::nullopt;

  const double u = intr.focal_x * t.x() / t.z() + intr.principal_point.x();
  const double v = intr.focal_y * t.y() / t.z() + intr.principal_point.y();
  const double margin = kCutoffSigma * g.scale.maxCoeff() * std::max(intr.focal_x, intr.focal_y) / t.z();
  if (u < -margin || u > intr.image_width + margin || v < -margin || v > intr.image_height + margin)
    return std::nullopt;

  Eigen::Matrix<double, 2, 3> j;
  j << intr.focal_x / t.z(), 0.0, -intr.focal_x * t.x() / (t.z() * t.z()),  //
      0.0, intr.focal_y / t.z(), -intr.focal_y * t.y() / (t.z() * t.z());
  const Mat3 w = pose.rotation();
  const Eigen::Matrix<double, 2, 3> m = j * w;
  Eigen::Matrix2d cov = m * g.covariance() * m.transpose();
  cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
  cov(0, 0) += kDilation;
  cov(1, 1) += kDilation;

  Projected2DGaussian p;
  p.center = Vec2(u, v);
  p.cov2d = cov;
  const double det = cov.determinant();
  p.conic << cov(1, 1) / det, -cov(0, 1) / det, -cov(1, 0) / det, cov(0, 0) / det;
  p.depth = t.z();
  p.opacity = g.opacity;
  p.color = g.color;
  const double mid = 0.5 * (cov(0, 0) + cov(1, 1));
  const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  p.radius = kCutoffSigma * std::sqrt(lambda_max);
  return p;
}

/// Splats in front-to-back order; ties broken on the projected parameters so the result
/// does not depend on the input order of the model.
struct ProjectedScene {
  std::vector<Projected2DGaussian> splats;
  std::vector<std::size_t> source;  // index into the model for each splat
};

inline ProjectedScene project_scene(const SplatModel& model, const CameraPose& pose,
                                    const CameraIntrinsics& intr) {
  ProjectedScene scene;
  std::vector<std::pair<Projected2DGaussian, std::size_t>> tmp;
  tmp.reserve(model.size());
  for (std::size_t i = 0; i < model.size(); ++i)
    if (auto p = project(model.gaussians[i], pose, intr)) tmp.emplace_back(*p, i);
  auto key = [](const Projected2DGaussian& p) {
    return std::make_tuple(p.depth, p.center.x(), p.center.y(), p.cov2d(0, 0), p.cov2d(0, 1),
                           p.cov2d(1, 1), p.opacity, p.color.x(), p.color.y(), p.color.z());
  };
  std::sort(tmp.begin(), tmp.end(), [&](const auto& a, const auto& b) {
    return key(a.first) < key(b.first);
  });
  for (auto& [p, i] : tmp) {
    scene.splats.push_back(p);
    scene.source.push_back(i);
  }
  return scene;
}

/// Contribution of a splat at pixel (x, y); zero outside the 3 sigma ellipse.
inline double splat_alpha(const Projected2DGaussian& s, double x, double y, double* falloff = nullptr) {
  const double dx = x - s.center.x();
  const double dy = y - s.center.y();
  const double power = s.conic(0, 0) * dx * dx + 2.0 * s.conic(0, 1) * dx * dy + s.conic(1, 1) * dy * dy;
  if (power > kCutoffSigma * kCutoffSigma) {
    if (falloff) *falloff = 0.0;
    return 0.0;
  }
  const double e = std::exp(-0.5 * power);
  if (falloff) *falloff = e;
  return std::min(kMaxAlpha, s.opacity * e);
}

namespace detail {

struct PixelRect {
  int x0, x1, y0, y1;  // inclusive
  bool empty() const { return x0 > x1 || y0 > y1; }
};

inline PixelRect footprint(const Projected2DGaussian& s, int width, int height) {
  return {std::max(0, static_cast<int>(std::ceil(s.center.x() - s.radius))),
          std::min(width - 1, static_cast<int>(std::floor(s.center.x() + s.radius))),
          std::max(0, static_cast<int>(std::ceil(s.center.y() - s.radius))),
          std::min(height - 1, static_cast<int>(std::floor(s.center.y() + s.radius)))};
}

}  // namespace detail

/// Per-pixel compositing state left after a forward pass; needed by the backward pass.
struct RenderState {
  Image image;
  std::vector<double> transmittance;  // final T per pixel
  std::vector<int> last;              // rank of the last splat composited per pixel (-1: none)
  ProjectedScene scene;
};

/// Front-to-back alpha compositing. Pixel (x, y) samples the image plane at (x, y).
inline RenderState render_state(const SplatModel& model, const CameraPose& pose,
                                const CameraIntrinsics& intr) {
  const int w = intr.image_width, h = intr.image_height;
  RenderState st;
  st.scene = project_scene(model, pose, intr);
  st.image = Image(w, h);
  st.transmittance.assign(static_cast<std::size_t>(w) * h, 1.0);
  st.last.assign(static_cast<std::size_t>(w) * h, -1);
  std::vector<char> done(static_cast<std::size_t>(w) * h, 0);

  for (std::size_t r = 0; r < st.scene.splats.size(); ++r) {
    const auto& s = st.scene.splats[r];
    const auto rect = detail::footprint(s, w, h);
    for (int y = rect.y0; y <= rect.y1; ++y)
      for (int x = rect.x0; x <= rect.x1; ++x) {
        const std::size_t pix = static_cast<std::size_t>(y) * w + x;
        if (done[pix]) continue;
        const double a = splat_alpha(s, x, y);
        if (a <= 0.0) continue;
        double& t = st.transmittance[pix];
        for (int c = 0; c < 3; ++c) st.image.data[3 * pix + c] += s.color[c] * a * t;
        t *= 1.0 - a;
        st.last[pix] = static_cast<int>(r);
        if (t < kMinTransmittance) done[pix] = 1;
      }
  }
  for (std::size_t pix = 0; pix < st.transmittance.size(); ++pix)
    for (int c = 0; c < 3; ++c) st.image.data[3 * pix + c] += model.background[c] * st.transmittance[pix];
  return st;
}

inline Image render(const SplatModel& model, const CameraPose& pose, const CameraIntrinsics& intr) {
  return render_state(model, pose, intr).image;
}

struct TrainConfig {
  int iterations = 60;
  double learning_rate = 1.0;
  bool train_opacity = true;
  bool train_color = true;
  int max_halvings = 30;
};

struct TrainView {
  CameraPose pose;
  Image target;
};

/// Gradients of the mean absolute error with respect to opacity and color of each splat.
struct LossGradient {
  double loss = 0.0;
  std::vector<double> d_opacity;
  std::vector<Vec3> d_color;
};

/// L1 loss averaged over all views, pixels and channels, plus analytic gradients obtained by
/// running the compositing recursion back to front.
inline LossGradient l1_loss_and_gradient(const SplatModel& model, const std::vector<TrainView>& views,
                                         const CameraIntrinsics& intr, bool with_gradient = true) {
  LossGradient out;
  out.d_opacity.assign(model.size(), 0.0);
  out.d_color.assign(model.size(), Vec3::Zero());
  const int w = intr.image_width, h = intr.image_height;
  const double norm = 1.0 / (static_cast<double>(views.size()) * w * h * 3.0);
  std::vector<double> t_cur, tail;
  std::vector<Vec3> dl_dpix;

  for (const auto& view : views) {
    require_same_shape(view.target, Image(w, h));
    RenderState st = render_state(model, view.pose, intr);
    const std::size_t npix = static_cast<std::size_t>(w) * h;
    dl_dpix.assign(npix, Vec3::Zero());
    for (std::size_t pix = 0; pix < npix; ++pix)
      for (int c = 0; c < 3; ++c) {
        const double d = st.image.data[3 * pix + c] - view.target.data[3 * pix + c];
        out.loss += std::abs(d) * norm;
        dl_dpix[pix][c] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * norm;
      }
    if (!with_gradient) continue;

    // Walk splats back to front. tail holds sum_{j>i} c_j a_j T_j + bg T_final per channel.
    t_cur = st.transmittance;
    tail.assign(3 * npix, 0.0);
    for (std::size_t pix = 0; pix < npix; ++pix)
      for (int c = 0; c < 3; ++c) tail[3 * pix + c] = model.background[c] * st.transmittance[pix];

    for (std::size_t r = st.scene.splats.size(); r-- > 0;) {
      const auto& s = st.scene.splats[r];
      const std::size_t gi = st.scene.source[r];
      const auto rect = detail::footprint(s, w, h);
      double d_op = 0.0;
      Vec3 d_col = Vec3::Zero();
      for (int y = rect.y0; y <= rect.y1; ++y)
        for (int x = rect.x0; x <= rect.x1; ++x) {
          const std::size_t pix = static_cast<std::size_t>(y) * w + x;
          if (st.last[pix] < static_cast<int>(r)) continue;
          double falloff = 0.0;
          const double a = splat_alpha(s, x, y, &falloff);
          if (a <= 0.0) continue;
          const double t_i = t_cur[pix] / (1.0 - a);
          double d_alpha = 0.0;
          for (int c = 0; c < 3; ++c) {
            const double g = dl_dpix[pix][c];
            d_col[c] += g * a * t_i;
            d_alpha += g * (s.color[c] * t_i - tail[3 * pix + c] / (1.0 - a));
            tail[3 * pix + c] += s.color[c] * a * t_i;
          }
          if (s.opacity * falloff < kMaxAlpha) d_op += d_alpha * falloff;
          t_cur[pix] = t_i;
        }
      out.d_opacity[gi] += d_op;
      out.d_color[gi] += d_col;
    }
  }
  return out;
}

namespace detail {

inline double logit(double p) { return std::log(p / (1.0 - p)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

struct TrainResult {
  SplatModel model;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int accepted_steps = 0;
};

/// Projected gradient descent on the L1 loss. Opacity is optimized through a logit so it stays
/// in (0,1); colors are clamped to [0,1]. A step that raises the loss is halved until it
/// does not, so the loss never increases.
inline TrainResult train_detailed(const SplatModel& model, const std::vector<TrainView>& views,
                                  const CameraIntrinsics& intr, const TrainConfig& cfg) {
  TrainResult res;
  res.model = model;
  if (cfg.iterations <= 0 || views.empty() || model.empty()) {
    if (!views.empty()) res.initial_loss = res.final_loss = l1_loss_and_gradient(model, views, intr, false).loss;
    return res;
  }
  constexpr double kOpacityFloor = 1e-6;
  auto current = l1_loss_and_gradient(res.model, views, intr);
  res.initial_loss = current.loss;
  double lr = cfg.learning_rate;

  // Scale gradient steps by the per-splat pixel share so the learning rate is resolution free.
  const double scale = static_cast<double>(intr.image_width) * intr.image_height;

  for (int it = 0; it < cfg.iterations; ++it) {
    bool accepted = false;
    for (int k = 0; k <= cfg.max_halvings && !accepted; ++k) {
      SplatModel trial = res.model;
      for (std::size_t i = 0; i < trial.size(); ++i) {
        auto& g = trial.gaussians[i];
        if (cfg.train_opacity) {
          const double a = std::clamp(g.opacity, kOpacityFloor, 1.0 - kOpacityFloor);
          const double theta = detail::logit(a) - lr * scale * current.d_opacity[i] * a * (1.0 - a);
          g.opacity = std::clamp(detail::sigmoid(theta), kOpacityFloor, 1.0 - kOpacityFloor);
        }
        if (cfg.train_color)
          g.color = (g.color - lr * scale * current.d_color[i]).cwiseMax(0.0).cwiseMin(1.0);
      }
      auto next = l1_loss_and_gradient(trial, views, intr);
      if (next.loss <= current.loss) {
        res.model = std::move(trial);
        current = std::move(next);
        accepted = true;
        ++res.accepted_steps;
      } else {
        lr *= 0.5;
      }
    }
    if (!accepted) break;
  }
  res.final_loss = current.loss;
  return res;
}

inline SplatModel train(const SplatModel& model, const std::vector<TrainView>& views,
                        const CameraIntrinsics& intr, const TrainConfig& cfg) {
  return train_detailed(model, views, intr, cfg).model;
}

}  // namespace activesplat
