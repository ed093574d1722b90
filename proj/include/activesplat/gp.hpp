#pragma once

#include "activesplat/errors.hpp"
#include "activesplat/geometry.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace activesplat {

using PoseFeature = Eigen::Matrix<double, 6, 1>;

/// Camera position followed by the unit viewing direction scaled by `direction_weight`.
inline PoseFeature pose_feature(const CameraPose& pose, double direction_weight = 0.0) {
  PoseFeature f;
  f.head<3>() = pose.position;
  f.tail<3>() = direction_weight * pose.view_direction();
  return f;
}

/// Product of a spatial RBF over pose features and an RBF over slot indices.
struct KernelConfig {
  double spatial_lengthscale = 1.0;
  double spatial_variance = 1.0;
  double time_lengthscale = 5.0;
  double noise_variance = 1e-6;

  bool valid() const {
    return spatial_lengthscale > 0.0 && time_lengthscale > 0.0 && spatial_variance >= 0.0 &&
           noise_variance >= 0.0;
  }
  bool operator==(const KernelConfig&) const = default;
};

inline double time_kernel(const KernelConfig& cfg, double slot_a, double slot_b) {
  const double dt = slot_a - slot_b;
  return std::exp(-dt * dt / (2.0 * cfg.time_lengthscale * cfg.time_lengthscale));
}

inline double kernel_eval(const KernelConfig& cfg, const PoseFeature& a, const PoseFeature& b, double slot_a,
                          double slot_b) {
  const double d2 = (a - b).squaredNorm();
  return cfg.spatial_variance * std::exp(-d2 / (2.0 * cfg.spatial_lengthscale * cfg.spatial_lengthscale)) *
         time_kernel(cfg, slot_a, slot_b);
}

/// Box constraints for maximum-likelihood fitting. Variance bounds are multiplied by the
/// mean squared observation (or 1 when all observations are zero).
struct KernelBounds {
  double lengthscale_lo = 1e-2;
  double lengthscale_hi = 1e2;
  double variance_lo = 1e-6;
  double variance_hi = 1e3;
  double time_lo = 0.5;
  double time_hi = 100.0;
  double noise_lo = 1e-8;
  double noise_hi = 1.0;

  /// Lengthscale bounds proportional to (scene diameter / 10).
  static KernelBounds for_scene(double diameter) {
    KernelBounds b;
    b.lengthscale_lo = 1e-2 * diameter / 10.0;
    b.lengthscale_hi = 1e2 * diameter / 10.0;
    return b;
  }
};

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

/// Exact GP regression over (pose feature, slot) inputs with a cached Cholesky factor of
/// K + noise I. Observations may optionally be standardized; otherwise the prior mean is 0.
class GpSurrogate {
public:
  GpSurrogate() = default;
  explicit GpSurrogate(KernelConfig kernel, bool standardize = false)
      : kernel_(kernel), standardize_(standardize) {}

  std::size_t size() const { return y_.size(); }
  const KernelConfig& kernel() const { return kernel_; }
  const std::vector<PoseFeature>& inputs() const { return x_; }
  const std::vector<double>& slots() const { return slots_; }
  const std::vector<double>& observations() const { return y_; }
  bool standardized() const { return standardize_; }
  double jitter() const { return jitter_; }

  void add(const PoseFeature& x, double slot, double y) {
    x_.push_back(x);
    slots_.push_back(slot);
    y_.push_back(y);
    refactor();
  }

  void set_kernel(const KernelConfig& k) {
    kernel_ = k;
    refactor();
  }

  /// K + noise I for the current kernel, without jitter.
  Eigen::MatrixXd gram() const { return gram_for(kernel_); }

  Eigen::MatrixXd gram_for(const KernelConfig& k) const {
    const auto n = static_cast<Eigen::Index>(x_.size());
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) g(i, j) = g(j, i) = kernel_eval(k, x_[i], x_[j], slots_[i], slots_[j]);
    g.diagonal().array() += k.noise_variance;
    return g;
  }

  /// Lower Cholesky factor of the (jittered) Gram matrix.
  const Eigen::MatrixXd& factor() const { return chol_; }

  /// Targets as seen by the GP (shifted and scaled when standardizing).
  Eigen::VectorXd targets() const {
    Eigen::VectorXd t(static_cast<Eigen::Index>(y_.size()));
    for (std::size_t i = 0; i < y_.size(); ++i) t[static_cast<Eigen::Index>(i)] = (y_[i] - offset_) / scale_;
    return t;
  }

  Posterior posterior(const PoseFeature& x, double slot) const {
    if (y_.empty()) return {offset_, kernel_.spatial_variance * scale_ * scale_};
    const auto n = static_cast<Eigen::Index>(x_.size());
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i) k[i] = kernel_eval(kernel_, x_[i], x, slots_[i], slot);
    const double mean = k.dot(alpha_);
    const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(k);
    double var = kernel_eval(kernel_, x, x, slot, slot) - v.squaredNorm();
    if (var < 0.0) {
      if (var < -1e-8) std::clog << "gp: posterior variance " << var << " clamped to 0\n";
      var = 0.0;
    }
    return {offset_ + scale_ * mean, scale_ * scale_ * var};
  }

  /// log N(y; 0, K + noise I) for an arbitrary kernel on the current data.
  double log_marginal_likelihood(const KernelConfig& k) const {
    if (y_.empty()) return 0.0;
    Eigen::MatrixXd l;
    if (!factorize(gram_for(k), l, nullptr)) return -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd t = targets();
    const Eigen::VectorXd a = l.triangularView<Eigen::Lower>().solve(t);
    return -0.5 * a.squaredNorm() - l.diagonal().array().log().sum() -
           0.5 * static_cast<double>(t.size()) * std::log(2.0 * std::numbers::pi);
  }

  double log_marginal_likelihood() const { return log_marginal_likelihood(kernel_); }

  /// Cholesky with a jitter ladder 0, 1e-10, ..., 1e-6 (relative to the mean diagonal).
  static bool factorize(const Eigen::MatrixXd& g, Eigen::MatrixXd& l, double* jitter_used) {
    if (!g.allFinite()) return false;
    const double diag_scale = g.rows() > 0 ? std::max(g.diagonal().mean(), 1e-300) : 1.0;
    static constexpr std::array<double, 6> ladder{0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};
    for (double j : ladder) {
      Eigen::MatrixXd a = g;
      a.diagonal().array() += j * diag_scale;
      Eigen::LLT<Eigen::MatrixXd> llt(a);
      if (llt.info() != Eigen::Success) continue;
      Eigen::MatrixXd lower = llt.matrixL();
      const double min_pivot = lower.diagonal().minCoeff();
      if (!(min_pivot * min_pivot > 1e-13 * diag_scale) || !lower.allFinite()) continue;
      l = std::move(lower);
      if (jitter_used) *jitter_used = j * diag_scale;
      return true;
    }
    return false;
  }

private:
  void refactor() {
    offset_ = 0.0;
    scale_ = 1.0;
    if (standardize_ && !y_.empty()) {
      double m = 0.0;
      for (double v : y_) m += v;
      m /= static_cast<double>(y_.size());
      double s2 = 0.0;
      for (double v : y_) s2 += (v - m) * (v - m);
      s2 /= static_cast<double>(y_.size());
      offset_ = m;
      scale_ = s2 > 0.0 ? std::sqrt(s2) : 1.0;
    }
    if (y_.empty()) return;
    if (!factorize(gram(), chol_, &jitter_))
      throw SingularKernel("K + noise I is not positive definite after jitter " + std::to_string(1e-6));
    alpha_ = chol_.transpose().triangularView<Eigen::Upper>().solve(
        chol_.triangularView<Eigen::Lower>().solve(targets()));
  }

  KernelConfig kernel_;
  bool standardize_ = false;
  std::vector<PoseFeature> x_;
  std::vector<double> slots_;
  std::vector<double> y_;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
  double offset_ = 0.0;
  double scale_ = 1.0;
};

namespace detail {

/// Nelder-Mead simplex maximization. Returns the best vertex; never worse than `start`.
inline std::vector<double> nelder_mead_max(const std::function<double(const std::vector<double>&)>& f,
                                           std::vector<double> start, double step, int max_evals,
                                           double* best_value = nullptr) {
  const std::size_t n = start.size();
  std::vector<std::vector<double>> pts(n + 1, start);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step;
  std::vector<double> val(n + 1);
  int evals = 0;
  auto eval = [&](const std::vector<double>& p) {
    ++evals;
    const double v = f(p);
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  };
  for (std::size_t i = 0; i <= n; ++i) val[i] = eval(pts[i]);

  std::vector<std::size_t> order(n + 1);
  while (evals < max_evals) {
    for (std::size_t i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] > val[b]; });
    const std::size_t best = order[0], worst = order[n], second = order[n - 1];
    if (std::abs(val[best] - val[worst]) < 1e-10 * (1.0 + std::abs(val[best]))) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t d = 0; d < n; ++d) centroid[d] += pts[order[i]][d] / static_cast<double>(n);
    auto along = [&](double t) {
      std::vector<double> p(n);
      for (std::size_t d = 0; d < n; ++d) p[d] = centroid[d] + t * (pts[worst][d] - centroid[d]);
      return p;
    };
    auto reflected = along(-1.0);
    const double fr = eval(reflected);
    if (fr > val[best]) {
      auto expanded = along(-2.0);
      const double fe = eval(expanded);
      if (fe > fr) {
        pts[worst] = expanded;
        val[worst] = fe;
      } else {
        pts[worst] = reflected;
        val[worst] = fr;
      }
    } else if (fr > val[second]) {
      pts[worst] = reflected;
      val[worst] = fr;
    } else {
      auto contracted = along(fr > val[worst] ? -0.5 : 0.5);
      const double fc = eval(contracted);
      if (fc > std::max(fr, val[worst])) {
        pts[worst] = contracted;
        val[worst] = fc;
      } else {
        for (std::size_t i = 1; i <= n; ++i) {
          auto& p = pts[order[i]];
          for (std::size_t d = 0; d < n; ++d) p[d] = pts[best][d] + 0.5 * (p[d] - pts[best][d]);
          val[order[i]] = eval(p);
        }
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i <= n; ++i)
    if (val[i] > val[best]) best = i;
  if (best_value) *best_value = val[best];
  return pts[best];
}

}  // namespace detail

struct FitOptions {
  KernelBounds bounds;
  int restarts = 4;
  int max_evals = 300;
  std::uint64_t seed = 17;
};

/// Maximizes the log marginal likelihood over log-parameters, starting from the incumbent
/// kernel and `restarts` seeded points in the bounds. Returns the incumbent when nothing beats it.
inline KernelConfig fit_hyperparameters(const GpSurrogate& gp, const FitOptions& opt = {}) {
  const KernelConfig incumbent = gp.kernel();
  if (gp.size() < 2) return incumbent;

  double y2 = 0.0;
  for (double v : gp.targets()) y2 += v * v;
  y2 /= static_cast<double>(gp.size());
  const double var_ref = y2 > 0.0 ? y2 : 1.0;
  const auto& b = opt.bounds;
  const std::array<double, 4> lo{std::log(b.lengthscale_lo), std::log(b.variance_lo * var_ref), std::log(b.time_lo),
                                 std::log(b.noise_lo)};
  const std::array<double, 4> hi{std::log(b.lengthscale_hi), std::log(b.variance_hi * var_ref), std::log(b.time_hi),
                                 std::log(b.noise_hi)};

  // Out-of-box coordinates are folded back in, so the simplex moves freely.
  auto to_config = [&](const std::vector<double>& p) {
    std::array<double, 4> c{};
    for (int i = 0; i < 4; ++i) c[i] = std::clamp(p[i], lo[i], hi[i]);
    return KernelConfig{std::exp(c[0]), std::exp(c[1]), std::exp(c[2]), std::exp(c[3])};
  };
  auto objective = [&](const std::vector<double>& p) { return gp.log_marginal_likelihood(to_config(p)); };

  KernelConfig best = incumbent;
  double best_value = gp.log_marginal_likelihood(incumbent);

  std::vector<std::vector<double>> starts;
  starts.push_back({std::log(incumbent.spatial_lengthscale), std::log(std::max(incumbent.spatial_variance, 1e-300)),
                    std::log(incumbent.time_lengthscale), std::log(std::max(incumbent.noise_variance, 1e-300))});
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int r = 0; r < opt.restarts; ++r) {
    std::vector<double> s(4);
    for (int i = 0; i < 4; ++i) s[i] = lo[i] + (hi[i] - lo[i]) * u01(rng);
    starts.push_back(s);
  }
  for (auto& s : starts) {
    for (int i = 0; i < 4; ++i) s[i] = std::clamp(s[i], lo[i], hi[i]);
    double value = 0.0;
    const auto p = detail::nelder_mead_max(objective, s, 0.5, opt.max_evals, &value);
    const KernelConfig cfg = to_config(p);
    const double v = gp.log_marginal_likelihood(cfg);
    if (v > best_value) {
      best_value = v;
      best = cfg;
    }
  }
  return best;
}

}  // namespace activesplat
